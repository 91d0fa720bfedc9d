//! Direction sets on the circle, elastic scattering kernels and the
//! conservation-corrected transfer matrix.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{AngularField, DirectionalField};

/// Midpoint-rule direction set on `[θ⋆ - θ_c, θ⋆ + θ_c]`.
///
/// Quadrature weights `mu` (gain sum) and outer weights `varpi` (dose and
/// balance sums) are both the bin width.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    /// Offsets from the beam axis, strictly increasing.
    pub theta: Vec<f64>,
    pub omega: Vec<[f64; 2]>,
    pub mu: Vec<f64>,
    pub varpi: Vec<f64>,
    pub theta_c: f64,
    /// Angle of the beam axis ω⋆ in the lab frame.
    pub axis: f64,
}

pub fn build_direction_set(q: usize, theta_c: f64, axis: f64) -> Result<DirectionSet> {
    if q == 0 || q % 2 == 0 {
        return Err(Error::Angular(format!(
            "Q must be a positive odd count so the beam axis is a node, got {q}"
        )));
    }
    if !(theta_c > 0.0 && theta_c <= PI) {
        return Err(Error::Angular(format!(
            "cone half-angle must lie in (0, π], got {theta_c}"
        )));
    }
    if !axis.is_finite() {
        return Err(Error::Angular("beam axis angle must be finite".into()));
    }
    let h = 2.0 * theta_c / q as f64;
    let centre = q / 2;
    let theta: Vec<f64> = (0..q).map(|i| (i as f64 - centre as f64) * h).collect();
    let omega = theta
        .iter()
        .map(|t| {
            let a = axis + t;
            [a.cos(), a.sin()]
        })
        .collect();
    Ok(DirectionSet {
        theta,
        omega,
        mu: vec![h; q],
        varpi: vec![h; q],
        theta_c,
        axis,
    })
}

impl DirectionSet {
    pub fn q(&self) -> usize {
        self.theta.len()
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * self.theta_c / self.q() as f64
    }

    /// Index of the node on the beam axis.
    pub fn central(&self) -> usize {
        self.q() / 2
    }

    pub fn measure(&self) -> f64 {
        self.mu.iter().sum()
    }

    /// Bin `j` as `[lo, hi]` offsets from the axis.
    pub fn bin(&self, j: usize) -> (f64, f64) {
        let h = self.bin_width();
        (self.theta[j] - 0.5 * h, self.theta[j] + 0.5 * h)
    }
}

/// Henyey–Greenstein density on the circle.
pub fn hg_phase(gamma: f64, theta: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(hg_unchecked(gamma, theta))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Angular(format!(
            "anisotropy must satisfy |γ| < 1, got {gamma}"
        )))
    }
}

#[inline]
fn hg_unchecked(gamma: f64, theta: f64) -> f64 {
    (1.0 - gamma * gamma) / (2.0 * PI * (1.0 + gamma * gamma - 2.0 * gamma * theta.cos()))
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Elastic scattering kernel. All variants are energy independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScatterKernelSpec {
    Dirac { sigma_el: f64 },
    HenyeyGreenstein { sigma_el: f64, gamma: f64 },
    Isotropic { sigma_el: f64 },
}

impl ScatterKernelSpec {
    pub fn sigma_el(&self) -> f64 {
        match *self {
            ScatterKernelSpec::Dirac { sigma_el }
            | ScatterKernelSpec::HenyeyGreenstein { sigma_el, .. }
            | ScatterKernelSpec::Isotropic { sigma_el } => sigma_el,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.sigma_el();
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::Angular(format!(
                "Σ_el must be non-negative, got {s}"
            )));
        }
        if let ScatterKernelSpec::HenyeyGreenstein { gamma, .. } = *self {
            check_gamma(gamma)?;
        }
        Ok(())
    }

    /// Angular density of the turning angle; `None` for the Dirac kernel.
    fn phase(&self) -> Option<Box<dyn Fn(f64) -> f64 + Sync>> {
        match *self {
            ScatterKernelSpec::Dirac { .. } => None,
            ScatterKernelSpec::HenyeyGreenstein { gamma, .. } => {
                Some(Box::new(move |t| hg_unchecked(gamma, t)))
            }
            ScatterKernelSpec::Isotropic { .. } => Some(Box::new(|_| 1.0 / (2.0 * PI))),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            ScatterKernelSpec::Dirac { sigma_el } => format!("dirac(sigma_el={sigma_el})"),
            ScatterKernelSpec::HenyeyGreenstein { sigma_el, gamma } => {
                format!("henyey_greenstein(sigma_el={sigma_el}, gamma={gamma})")
            }
            ScatterKernelSpec::Isotropic { sigma_el } => format!("isotropic(sigma_el={sigma_el})"),
        }
    }
}

const BIN_TOL: f64 = 1e-10;

/// Bin averages `p̄_j = μ_j⁻¹ ∫_{B_j} p_γ` over the direction bins.
pub fn bin_average_phase(gamma: f64, dirs: &DirectionSet) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let f = |t: f64| hg_unchecked(gamma, t);
    Ok((0..dirs.q())
        .map(|j| {
            let (a, b) = dirs.bin(j);
            adaptive_simpson(&f, a, b, BIN_TOL * (b - a)) / dirs.mu[j]
        })
        .collect())
}

/// Mass of `p_γ` falling outside the cone, `1 - Σ_j μ_j p̄_j`.
pub fn cone_tail_mass(gamma: f64, dirs: &DirectionSet) -> Result<f64> {
    let p = bin_average_phase(gamma, dirs)?;
    Ok(1.0 - p.iter().zip(&dirs.mu).map(|(p, m)| p * m).sum::<f64>())
}

/// Scattering coupling between discrete directions.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    q: usize,
    /// `M[i][j]`, row-major, rate from direction `j` into direction `i` (1/cm).
    entries: Vec<f64>,
    /// `μ_j M[i][j]`, what the gain sum actually multiplies by.
    gain_weights: Vec<f64>,
    sigma_el: f64,
    sigma_t: f64,
    /// Column rescaling factors applied for conservation.
    column_scale: Vec<f64>,
}

impl TransferMatrix {
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.q + j]
    }
    pub fn sigma_el(&self) -> f64 {
        self.sigma_el
    }
    /// Removal cross-section used by sweeps.
    pub fn sigma_t(&self) -> f64 {
        self.sigma_t
    }
    pub fn with_sigma_t(mut self, sigma_t: f64) -> Self {
        self.sigma_t = sigma_t;
        self
    }
    pub fn column_scale(&self) -> &[f64] {
        &self.column_scale
    }

    /// `Σ_i ϖ_i M[i][j]` for column `j`.
    pub fn column_mass(&self, varpi: &[f64], j: usize) -> f64 {
        (0..self.q).map(|i| varpi[i] * self.get(i, j)).sum()
    }

    /// CSV with a header row of `θ_j` and one row per `i`.
    pub fn to_csv_string(&self, dirs: &DirectionSet) -> String {
        let mut s = String::from("theta_i");
        for t in &dirs.theta {
            let _ = write!(s, ",{t}");
        }
        s.push('\n');
        for i in 0..self.q {
            let _ = write!(s, "{}", dirs.theta[i]);
            for j in 0..self.q {
                let _ = write!(s, ",{}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }
}

/// Bin-averaged, conservation-corrected transfer matrix.
///
/// Raw entries are `Σ_el p̄(θ_i - θ_j)`, the kernel averaged over a bin-wide
/// window of relative angle; each column is then rescaled so that
/// `Σ_i ϖ_i M[i][j] = Σ_el`. The Dirac kernel maps to `(Σ_el/μ_j) δ_ij`.
pub fn build_transfer_matrix(
    kernel: &ScatterKernelSpec,
    dirs: &DirectionSet,
) -> Result<TransferMatrix> {
    kernel.validate()?;
    let q = dirs.q();
    let sigma_el = kernel.sigma_el();
    let mut entries = vec![0.0; q * q];
    let mut column_scale = vec![1.0; q];
    match kernel.phase() {
        None => {
            for j in 0..q {
                entries[j * q + j] = sigma_el / dirs.mu[j];
            }
        }
        Some(phase) if sigma_el > 0.0 => {
            let h = dirs.bin_width();
            // Uniform nodes: θ_i - θ_j = (i - j) h, so only 2Q-1 distinct offsets.
            let offsets: Vec<f64> = (0..2 * q - 1)
                .into_par_iter()
                .map(|k| {
                    let d = (k as f64 - (q - 1) as f64) * h;
                    adaptive_simpson(&phase, d - 0.5 * h, d + 0.5 * h, BIN_TOL * h) / h
                })
                .collect();
            for i in 0..q {
                for j in 0..q {
                    entries[i * q + j] = sigma_el * offsets[i + q - 1 - j];
                }
            }
            for j in 0..q {
                let mass: f64 = (0..q).map(|i| dirs.varpi[i] * entries[i * q + j]).sum();
                if !(mass > 0.0 && mass.is_finite()) {
                    return Err(Error::Angular(format!(
                        "column {j} has no mass inside the angular domain; cannot enforce conservation"
                    )));
                }
                let c = sigma_el / mass;
                column_scale[j] = c;
                for i in 0..q {
                    entries[i * q + j] *= c;
                }
            }
        }
        Some(_) => {}
    }
    let gain_weights = (0..q * q).map(|ij| dirs.mu[ij % q] * entries[ij]).collect();
    Ok(TransferMatrix {
        q,
        entries,
        gain_weights,
        sigma_el,
        sigma_t: sigma_el,
        column_scale,
    })
}

/// `G_i = Σ_j μ_j M[i][j] Ψ_j`, pointwise over the grid.
pub fn apply_gain(m: &TransferMatrix, psi: &AngularField) -> Result<AngularField> {
    if psi.q() != m.q {
        return Err(Error::Shape(format!(
            "transfer matrix is {}x{} but field has {} directions",
            m.q,
            m.q,
            psi.q()
        )));
    }
    let dims = psi
        .dims()
        .ok_or_else(|| Error::Shape("empty angular field".into()))?;
    let q = m.q;
    let comps: Vec<DirectionalField> = (0..q)
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; dims.len()];
            for j in 0..q {
                let w = m.gain_weights[i * q + j];
                if w == 0.0 {
                    continue;
                }
                for (o, v) in out.iter_mut().zip(psi.component(j).values()) {
                    *o += w * v;
                }
            }
            DirectionalField::from_values(dims, out).expect("dims match")
        })
        .collect();
    AngularField::from_components(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Dims;
    use approx::assert_relative_eq;

    /// Closed-form CDF of the HG density on (-π, π), used as an oracle.
    fn hg_cdf(gamma: f64, t: f64) -> f64 {
        (((1.0 + gamma) / (1.0 - gamma)) * (0.5 * t).tan()).atan() / PI
    }

    #[test]
    fn direction_set_midpoints() {
        let d = build_direction_set(1, PI / 2.0, 0.0).unwrap();
        assert_eq!(d.theta, vec![0.0]);
        assert_relative_eq!(d.mu[0], PI);

        let d = build_direction_set(3, PI / 2.0, 0.0).unwrap();
        assert_relative_eq!(d.theta[0], -PI / 3.0, max_relative = 1e-15);
        assert_eq!(d.theta[1], 0.0);
        assert_relative_eq!(d.theta[2], PI / 3.0, max_relative = 1e-15);
        for w in &d.mu {
            assert_relative_eq!(*w, PI / 3.0, max_relative = 1e-15);
        }

        let d = build_direction_set(33, PI / 2.0, 0.0).unwrap();
        assert_eq!(d.q(), 33);
        assert!((d.measure() - PI).abs() < 1e-14);
        assert_eq!(d.omega[d.central()], [1.0, 0.0]);
        assert!(d.theta.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn direction_set_rejects_bad_input() {
        assert!(build_direction_set(0, 1.0, 0.0).is_err());
        assert!(build_direction_set(4, 1.0, 0.0).is_err());
        assert!(build_direction_set(3, 0.0, 0.0).is_err());
        assert!(build_direction_set(3, 4.0, 0.0).is_err());
    }

    #[test]
    fn hg_values() {
        for t in [-3.0, 0.0, 1.0, 2.5] {
            assert_relative_eq!(hg_phase(0.0, t).unwrap(), 1.0 / (2.0 * PI));
        }
        let v = hg_phase(0.95, PI / 2.0).unwrap();
        assert!((v - 8.16e-3).abs() < 1e-5, "{v}");
        let v = hg_phase(0.95, 3.0 * PI / 4.0).unwrap();
        // sup on the excluded arc times its length
        assert!(
            (v * 2.0 * (PI - 3.0 * PI / 4.0) - 7.5e-3).abs() < 1e-4,
            "{v}"
        );
        assert!(hg_phase(1.0, 0.0).is_err());
        assert!(hg_phase(-1.2, 0.0).is_err());
    }

    #[test]
    fn hg_normalization_midpoint() {
        let n = 10_000;
        let h = 2.0 * PI / n as f64;
        for g in [0.0, 0.5, 0.9, 0.99] {
            let s: f64 = (0..n)
                .map(|k| hg_unchecked(g, -PI + (k as f64 + 0.5) * h) * h)
                .sum();
            assert!((s - 1.0).abs() < 1e-8, "γ={g}: {s}");
        }
    }

    #[test]
    fn bin_averages() {
        let d = build_direction_set(15, PI, 0.0).unwrap();
        let p = bin_average_phase(0.0, &d).unwrap();
        for v in &p {
            assert_relative_eq!(*v, 1.0 / (2.0 * PI), max_relative = 1e-12);
        }
        // Q = 17 (odd) on the full circle
        let d = build_direction_set(17, PI, 0.0).unwrap();
        let p = bin_average_phase(0.9, &d).unwrap();
        let mass: f64 = p.iter().zip(&d.mu).map(|(a, b)| a * b).sum();
        assert!((mass - 1.0).abs() < 1e-10);
        for j in 0..d.q() {
            let (a, b) = d.bin(j);
            if a > -PI && b < PI {
                let exact = (hg_cdf(0.9, b) - hg_cdf(0.9, a)) / d.mu[j];
                assert_relative_eq!(p[j], exact, max_relative = 1e-9);
            }
        }
        let d = build_direction_set(33, PI / 2.0, 0.0).unwrap();
        let tail = cone_tail_mass(0.95, &d).unwrap();
        assert!(tail > 0.0 && tail <= 2.56e-2, "{tail}");
    }

    #[test]
    fn cone_tail_shrinks_with_cone() {
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let tc = PI * k as f64 / 8.0;
            let d = build_direction_set(21, tc, 0.0).unwrap();
            let tail = cone_tail_mass(0.8, &d).unwrap();
            assert!(tail <= prev + 1e-12);
            prev = tail;
        }
        assert!(prev.abs() < 1e-10);
    }

    #[test]
    fn dirac_gain_is_identity_times_sigma() {
        let d = build_direction_set(5, PI / 2.0, 0.0).unwrap();
        let m = build_transfer_matrix(&ScatterKernelSpec::Dirac { sigma_el: 0.7 }, &d).unwrap();
        let dims = Dims {
            nx: 2,
            ny: 3,
            ne: 2,
        };
        let comps = (0..5)
            .map(|i| {
                DirectionalField::from_values(dims, (0..12).map(|k| (i * 12 + k) as f64).collect())
                    .unwrap()
            })
            .collect();
        let psi = AngularField::from_components(comps).unwrap();
        let g = apply_gain(&m, &psi).unwrap();
        for i in 0..5 {
            for (a, b) in g
                .component(i)
                .values()
                .iter()
                .zip(psi.component(i).values())
            {
                assert_relative_eq!(*a, 0.7 * b, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn isotropic_columns_conserve() {
        let d = build_direction_set(9, PI, 0.0).unwrap();
        let m = build_transfer_matrix(&ScatterKernelSpec::Isotropic { sigma_el: 1.3 }, &d).unwrap();
        for j in 0..9 {
            assert!((m.column_mass(&d.varpi, j) / 1.3 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn hg_matrix_symmetric_before_rescaling() {
        let d = build_direction_set(11, PI / 2.0, 0.0).unwrap();
        let m = build_transfer_matrix(
            &ScatterKernelSpec::HenyeyGreenstein {
                sigma_el: 1.0,
                gamma: 0.6,
            },
            &d,
        )
        .unwrap();
        let raw = |i: usize, j: usize| m.get(i, j) / m.column_scale()[j];
        for i in 0..11 {
            for j in 0..11 {
                assert_relative_eq!(raw(i, j), raw(j, i), max_relative = 1e-13);
                if i + 1 < 11 && j + 1 < 11 {
                    assert_relative_eq!(raw(i, j), raw(i + 1, j + 1), max_relative = 1e-13);
                }
                assert!(m.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn zero_sigma_gives_zero_matrix() {
        let d = build_direction_set(5, PI / 2.0, 0.0).unwrap();
        let m = build_transfer_matrix(
            &ScatterKernelSpec::HenyeyGreenstein {
                sigma_el: 0.0,
                gamma: 0.5,
            },
            &d,
        )
        .unwrap();
        assert!((0..5).all(|i| (0..5).all(|j| m.get(i, j) == 0.0)));
    }

    #[test]
    fn gain_shape_mismatch() {
        let d = build_direction_set(3, PI / 2.0, 0.0).unwrap();
        let m = build_transfer_matrix(&ScatterKernelSpec::Isotropic { sigma_el: 1.0 }, &d).unwrap();
        let psi = AngularField::zeros(
            Dims {
                nx: 2,
                ny: 2,
                ne: 2,
            },
            5,
        );
        assert!(apply_gain(&m, &psi).is_err());
    }

    #[test]
    fn gain_matches_naive_triple_loop() {
        let d = build_direction_set(5, PI / 2.0, 0.0).unwrap();
        let m = build_transfer_matrix(
            &ScatterKernelSpec::HenyeyGreenstein {
                sigma_el: 0.9,
                gamma: 0.7,
            },
            &d,
        )
        .unwrap();
        let dims = Dims {
            nx: 3,
            ny: 2,
            ne: 4,
        };
        let mut seed = 12345u64;
        let mut rnd = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let comps: Vec<_> = (0..5)
            .map(|_| {
                DirectionalField::from_values(dims, (0..dims.len()).map(|_| rnd()).collect())
                    .unwrap()
            })
            .collect();
        let psi = AngularField::from_components(comps).unwrap();
        let g = apply_gain(&m, &psi).unwrap();
        for i in 0..5 {
            for n in 0..dims.len() {
                let mut acc = 0.0;
                for j in 0..5 {
                    acc += d.mu[j] * m.get(i, j) * psi.component(j).values()[n];
                }
                assert_relative_eq!(g.component(i).values()[n], acc, max_relative = 1e-13);
            }
        }
    }
}
