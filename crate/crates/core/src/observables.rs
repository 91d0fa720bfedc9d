//! Dose functionals, depth-dose extraction, beam width and dose error metrics.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{trapezoid_weights, AngularField, PhaseGrid};

/// Spatial dose on the nodes of a grid's (x, y) plane, unnormalised.
#[derive(Debug, Clone, PartialEq)]
pub struct DoseField {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Row-major in x: `values[k * ny + l]`.
    pub values: Vec<f64>,
}

impl DoseField {
    pub fn zeros(grid: &PhaseGrid) -> Self {
        DoseField {
            x: grid.x.clone(),
            y: grid.y.clone(),
            values: vec![0.0; grid.spatial_len()],
        }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.ny() + l]
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_same_grid(&self, other: &DoseField) -> Result<()> {
        if self.x != other.x || self.y != other.y {
            return Err(Error::Shape("dose fields live on different grids".into()));
        }
        Ok(())
    }

    /// Node-wise sum, in argument order.
    pub fn sum(parts: &[&DoseField]) -> Result<DoseField> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("sum of no dose fields".into()))?;
        let mut out = (*first).clone();
        for p in &parts[1..] {
            out.check_same_grid(p)?;
            for (a, b) in out.values.iter_mut().zip(&p.values) {
                *a += b;
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, c: f64) -> DoseField {
        DoseField {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }

    /// `x_cm,y_cm,dose`.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("x_cm,y_cm,dose\n");
        for (k, x) in self.x.iter().enumerate() {
            for (l, y) in self.y.iter().enumerate() {
                let _ = writeln!(s, "{x},{y},{}", self.get(k, l));
            }
        }
        s
    }
}

/// `Σ_k w_k Σ_i ϖ_i κ(E_k) Ψ_i(x, E_k)` with trapezoid weights in energy.
pub fn dose(
    psi: &AngularField,
    kappa: impl Fn(f64) -> f64,
    varpi: &[f64],
    grid: &PhaseGrid,
) -> Result<DoseField> {
    if psi.dims() != Some(grid.dims()) || psi.q() != varpi.len() {
        return Err(Error::Shape(format!(
            "dose: field has {} directions on {:?}, expected {} on {:?}",
            psi.q(),
            psi.dims(),
            varpi.len(),
            grid.dims()
        )));
    }
    let we = trapezoid_weights(&grid.e);
    let mut coef = Vec::with_capacity(grid.ne());
    for (e, w) in grid.e.iter().zip(&we) {
        let k = kappa(*e);
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::Input(format!(
                "dose weight must be non-negative, got {k} at E = {e}"
            )));
        }
        coef.push(w * k);
    }
    let ne = grid.ne();
    let mut out = DoseField::zeros(grid);
    for (n, d) in out.values.iter_mut().enumerate() {
        let base = n * ne;
        let mut acc = 0.0;
        for (comp, v) in psi.components().iter().zip(varpi) {
            let vals = &comp.values()[base..base + ne];
            let inner: f64 = vals.iter().zip(&coef).map(|(p, c)| p * c).sum();
            acc += v * inner;
        }
        *d = acc;
    }
    Ok(out)
}

/// `max |D - D_ref| / max D_ref`.
pub fn relative_linf_error(d: &DoseField, d_ref: &DoseField) -> Result<f64> {
    d.check_same_grid(d_ref)?;
    let peak = d_ref.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::Input("reference dose is identically zero".into()));
    }
    let diff = d
        .values
        .iter()
        .zip(&d_ref.values)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(diff / peak)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthDoseCurve {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub band_halfwidth: f64,
}

impl DepthDoseCurve {
    /// Index of the largest value.
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Mean of each column over the rows with `|y - y_mid| <= band_halfwidth`.
pub fn depth_dose(d: &DoseField, band_halfwidth: f64) -> Result<DepthDoseCurve> {
    let y_mid = 0.5 * (d.y[0] + d.y[d.ny() - 1]);
    let tol = 1e-9 * (d.y[d.ny() - 1] - d.y[0]);
    let rows: Vec<usize> = (0..d.ny())
        .filter(|&l| (d.y[l] - y_mid).abs() <= band_halfwidth + tol)
        .collect();
    if rows.is_empty() {
        return Err(Error::Input(format!(
            "depth-dose band of half-width {band_halfwidth} selects no grid rows"
        )));
    }
    let values = (0..d.nx())
        .map(|k| rows.iter().map(|&l| d.get(k, l)).sum::<f64>() / rows.len() as f64)
        .collect();
    Ok(DepthDoseCurve {
        x: d.x.clone(),
        values,
        band_halfwidth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamWidth {
    pub width: f64,
    pub centroid: f64,
    /// Depth of the grid column actually used.
    pub x: f64,
}

/// Second-moment width of the column nearest to `x_dagger`.
pub fn beam_width(d: &DoseField, x_dagger: f64) -> Result<BeamWidth> {
    let k = nearest(&d.x, x_dagger);
    let wy = trapezoid_weights(&d.y);
    let col: Vec<f64> = (0..d.ny()).map(|l| d.get(k, l)).collect();
    let mass: f64 = col.iter().zip(&wy).map(|(v, w)| v * w).sum();
    if !(mass > 0.0) {
        return Err(Error::Input(format!(
            "dose column at x = {} has no mass",
            d.x[k]
        )));
    }
    let centroid = col
        .iter()
        .zip(&wy)
        .zip(&d.y)
        .map(|((v, w), y)| v * w * y)
        .sum::<f64>()
        / mass;
    let second = col
        .iter()
        .zip(&wy)
        .zip(&d.y)
        .map(|((v, w), y)| v * w * (y - centroid).powi(2))
        .sum::<f64>()
        / mass;
    Ok(BeamWidth {
        width: second.sqrt(),
        centroid,
        x: d.x[k],
    })
}

pub(crate) fn nearest(nodes: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, v) in nodes.iter().enumerate() {
        if (v - t).abs() < (nodes[best] - t).abs() {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DirectionalField, GridConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(nx: usize, ny: usize, ne: usize) -> PhaseGrid {
        build_grid(&GridConfig {
            x_min: 0.0,
            x_max: 2.0,
            y_min: -1.0,
            y_max: 1.0,
            nx,
            ny,
            e_min: 2.0,
            e_max: 7.0,
            ne,
        })
        .unwrap()
    }

    fn field_from(
        g: &PhaseGrid,
        q: usize,
        f: impl Fn(usize, f64, f64, f64) -> f64,
    ) -> AngularField {
        AngularField::from_components(
            (0..q)
                .map(|i| {
                    let mut c = DirectionalField::zeros(g.dims());
                    for k in 0..g.nx() {
                        for l in 0..g.ny() {
                            for m in 0..g.ne() {
                                c.set(k, l, m, f(i, g.x[k], g.y[l], g.e[m]));
                            }
                        }
                    }
                    c
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dose_trivial_cases() {
        let g = grid(4, 5, 6);
        let varpi = [0.2, 0.3, 0.5];
        let zero = AngularField::zeros(g.dims(), 3);
        assert!(dose(&zero, |_| 1.0, &varpi, &g)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == 0.0));
        let ones = field_from(&g, 3, |_, _, _, _| 1.0);
        let d = dose(&ones, |_| 1.0, &varpi, &g).unwrap();
        for v in &d.values {
            assert_relative_eq!(*v, 1.0 * 5.0, max_relative = 1e-14);
        }
        assert!(dose(&ones, |_| 1.0, &varpi[..2], &g).is_err());
        assert!(dose(&ones, |_| -1.0, &varpi, &g).is_err());
    }

    #[test]
    fn dose_matches_direct_summation() {
        let g = grid(3, 4, 5);
        let varpi = [0.7, 1.1];
        let psi = field_from(&g, 2, |i, x, y, e| (1.0 + i as f64) * (x + 2.0 * y * y) / e);
        let kappa = |e: f64| 3.0 * e.powf(-0.7);
        let d = dose(&psi, kappa, &varpi, &g).unwrap();
        let h = g.de;
        for k in 0..3 {
            for l in 0..4 {
                let mut acc = 0.0;
                for m in 0..5 {
                    let w = if m == 0 || m == 4 { 0.5 * h } else { h };
                    for i in 0..2 {
                        acc += w * varpi[i] * kappa(g.e[m]) * psi.component(i).get(k, l, m);
                    }
                }
                assert_relative_eq!(d.get(k, l), acc, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn relative_error_basics() {
        let g = grid(3, 3, 2);
        let mut a = DoseField::zeros(&g);
        a.values
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = 1.0 + i as f64);
        assert_eq!(relative_linf_error(&a, &a).unwrap(), 0.0);
        assert_relative_eq!(
            relative_linf_error(&a.scaled(1.01), &a).unwrap(),
            0.01,
            max_relative = 1e-10
        );
        assert!(relative_linf_error(&a, &DoseField::zeros(&g)).is_err());
    }

    #[test]
    fn depth_dose_bands() {
        let g = grid(3, 9, 2);
        let mut d = DoseField::zeros(&g);
        d.values.iter_mut().for_each(|v| *v = 4.5);
        let c = depth_dose(&d, 0.25).unwrap();
        assert!(c.values.iter().all(|v| (*v - 4.5).abs() < 1e-14));

        for k in 0..3 {
            for l in 0..9 {
                d.values[k * 9 + l] = (k + 1) as f64 * g.y[l].abs();
            }
        }
        let full = depth_dose(&d, 10.0).unwrap();
        for k in 0..3 {
            let mean = (0..9).map(|l| d.get(k, l)).sum::<f64>() / 9.0;
            assert_relative_eq!(full.values[k], mean, max_relative = 1e-14);
        }
        // one spacing is 0.25: three rows
        let one = depth_dose(&d, 0.25).unwrap();
        assert_relative_eq!(
            one.values[1],
            2.0 * (0.25 + 0.0 + 0.25) / 3.0,
            max_relative = 1e-14
        );
        let small = DoseField {
            y: vec![-1.0, 1.0],
            x: vec![0.0],
            values: vec![1.0, 1.0],
        };
        assert!(depth_dose(&small, 0.1).is_err());
    }

    #[test]
    fn beam_width_oracles() {
        // indicator on [-a, a] with nodes on ±a, which are interior nodes of the
        // column and so carry full weight: Σ(lh)² / Σh = a(a + h)/3
        let ny = 401;
        let y: Vec<f64> = (0..ny)
            .map(|l| -2.0 + 4.0 * l as f64 / (ny - 1) as f64)
            .collect();
        let a = 1.0;
        let d = DoseField {
            x: vec![0.0, 1.0],
            y: y.clone(),
            values: [
                vec![0.0; ny],
                y.iter()
                    .map(|v| if v.abs() <= a + 1e-12 { 1.0 } else { 0.0 })
                    .collect(),
            ]
            .concat(),
        };
        let w = beam_width(&d, 0.9).unwrap();
        assert_eq!(w.x, 1.0);
        let h = 4.0 / (ny - 1) as f64;
        assert_relative_eq!(w.width, (a * (a + h) / 3.0).sqrt(), max_relative = 1e-12);
        assert!(w.centroid.abs() < 1e-12);
        assert!(beam_width(&d, 0.1).is_err());

        let sigma = 0.3;
        let gauss = |c: f64| DoseField {
            x: vec![0.5],
            y: y.clone(),
            values: y
                .iter()
                .map(|v| (-(v - c) * (v - c) / (2.0 * sigma * sigma)).exp())
                .collect(),
        };
        let g0 = beam_width(&gauss(0.0), 0.5).unwrap();
        assert_relative_eq!(g0.width, sigma, max_relative = 0.02);
        let g1 = beam_width(&gauss(0.4), 0.5).unwrap();
        assert_relative_eq!(g1.centroid, 0.4, max_relative = 1e-6);
        assert_relative_eq!(g1.width, g0.width, max_relative = 1e-4);
    }

    proptest! {
        #[test]
        fn width_is_scale_invariant(c in 1e-3f64..1e3, shift in -0.5f64..0.5) {
            let y: Vec<f64> = (0..41).map(|l| -2.0 + 0.1 * l as f64).collect();
            let d = DoseField {
                x: vec![0.0],
                y: y.clone(),
                values: y.iter().map(|v| 1.0 / (1.0 + (v - shift).powi(2))).collect(),
            };
            let a = beam_width(&d, 0.0).unwrap();
            let b = beam_width(&d.scaled(c), 0.0).unwrap();
            prop_assert!((a.width - b.width).abs() <= 1e-12 * a.width);
        }

        #[test]
        fn dose_is_linear(a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let g = grid(3, 3, 4);
            let varpi = [0.5, 0.5];
            let u = field_from(&g, 2, |i, x, y, e| 1.0 + i as f64 + x * y + e);
            let v = field_from(&g, 2, |_, x, _, e| x * e);
            let w = field_from(&g, 2, |i, x, y, e| {
                a * (1.0 + i as f64 + x * y + e) + b * x * e
            });
            let du = dose(&u, |e| e, &varpi, &g).unwrap();
            let dv = dose(&v, |e| e, &varpi, &g).unwrap();
            let dw = dose(&w, |e| e, &varpi, &g).unwrap();
            for n in 0..du.values.len() {
                let lin = a * du.values[n] + b * dv.values[n];
                prop_assert!((dw.values[n] - lin).abs() <= 1e-10 * (1.0 + lin.abs()));
            }
        }
    }
}
