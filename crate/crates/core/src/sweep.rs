//! Method-of-characteristics solve for a single direction.
//!
//! Characteristics of the drift `(ω, -S(E))` are parametrized by path length
//! through the range map: walking a distance `s` backwards from `(x, E)` lands
//! at `x - sω` with energy `R⁻¹(R(E) + s)`. Along a characteristic
//! `φ = Sψ` obeys `dφ/dt = -σ_T φ + S G`, so every node value is an
//! attenuated inflow term plus a line integral of the source, evaluated
//! independently per node.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DirectionalField, Face, PhaseGrid};
use crate::physics::StoppingModel;

/// Removal cross-section `σ_T(E)` in 1/cm.
#[derive(Debug, Clone, PartialEq)]
pub enum Removal {
    Constant(f64),
    /// `(E, σ)` pairs with strictly increasing energies, linearly interpolated
    /// and held constant outside.
    Table(Vec<(f64, f64)>),
}

impl Removal {
    pub fn at(&self, e: f64) -> f64 {
        match self {
            Removal::Constant(s) => *s,
            Removal::Table(t) => {
                let i = t.partition_point(|p| p.0 <= e);
                if i == 0 {
                    t[0].1
                } else if i == t.len() {
                    t[t.len() - 1].1
                } else {
                    let (e0, s0) = t[i - 1];
                    let (e1, s1) = t[i];
                    s0 + (s1 - s0) * (e - e0) / (e1 - e0)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Removal::Constant(s) => s.is_finite() && *s >= 0.0,
            Removal::Table(t) => {
                !t.is_empty()
                    && t.iter().all(|p| p.1.is_finite() && p.1 >= 0.0)
                    && t.windows(2).all(|w| w[1].0 > w[0].0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Input(
                "removal must be finite and non-negative".into(),
            ))
        }
    }
}

/// Where a backward characteristic leaves the phase grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryTag {
    Spatial(Face),
    EnergyTop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicTrace {
    /// Spatial entry point.
    pub x0: [f64; 2],
    /// Entry energy, in `[E, E_max]`.
    pub e0: f64,
    /// Path length from the entry point to the target.
    pub tau: f64,
    pub tag: EntryTag,
    /// Target point.
    pub x: [f64; 2],
    pub e: f64,
    pub omega: [f64; 2],
    /// `R(E)` at the target.
    pub r: f64,
}

impl CharacteristicTrace {
    /// Point and energy a distance `s` upstream of the target.
    pub fn at(&self, stopping: &StoppingModel, s: f64) -> ([f64; 2], f64) {
        (
            [self.x[0] - s * self.omega[0], self.x[1] - s * self.omega[1]],
            stopping.inverse_range(self.r + s),
        )
    }

    /// Midpoint samples `(s, point, energy, ds)` of `[0, τ]` with spacing at
    /// most `h_max`. The step is shrunk so the samples partition the path.
    pub fn samples<'a>(
        &'a self,
        stopping: &'a StoppingModel,
        h_max: f64,
    ) -> impl Iterator<Item = (f64, [f64; 2], f64, f64)> + 'a {
        let n = if self.tau > 0.0 {
            (self.tau / h_max).ceil().max(1.0) as usize
        } else {
            0
        };
        let ds = if n > 0 { self.tau / n as f64 } else { 0.0 };
        (0..n).map(move |j| {
            let s = (j as f64 + 0.5) * ds;
            let (p, e) = self.at(stopping, s);
            (s, p, e, ds)
        })
    }
}

/// Distance walked backwards along `-ω` from `p` before leaving the box, with
/// the face that is hit.
#[inline]
fn spatial_exit(grid: &PhaseGrid, p: [f64; 2], omega: [f64; 2]) -> (f64, Face) {
    const EPS: f64 = 1e-15;
    let (mut tau, mut face) = (f64::INFINITY, Face::Left);
    if omega[0] > EPS {
        tau = (p[0] - grid.x_min()) / omega[0];
        face = Face::Left;
    } else if omega[0] < -EPS {
        tau = (grid.x_max() - p[0]) / -omega[0];
        face = Face::Right;
    }
    if omega[1] > EPS {
        let t = (p[1] - grid.y_min()) / omega[1];
        if t < tau {
            tau = t;
            face = Face::Bottom;
        }
    } else if omega[1] < -EPS {
        let t = (grid.y_max() - p[1]) / -omega[1];
        if t < tau {
            tau = t;
            face = Face::Top;
        }
    }
    (tau.max(0.0), face)
}

#[inline]
fn trace_with_range(
    grid: &PhaseGrid,
    stopping: &StoppingModel,
    omega: [f64; 2],
    p: [f64; 2],
    e: f64,
    r: f64,
    r_top: f64,
) -> CharacteristicTrace {
    let (tau_x, face) = spatial_exit(grid, p, omega);
    let tau_e = (r_top - r).max(0.0);
    let (tau, tag, e0) = if tau_x <= tau_e {
        let e0 = if tau_x == 0.0 {
            e
        } else {
            stopping.inverse_range(r + tau_x).clamp(e, grid.e_max())
        };
        (tau_x, EntryTag::Spatial(face), e0)
    } else {
        (tau_e, EntryTag::EnergyTop, grid.e_max())
    };
    CharacteristicTrace {
        x0: [p[0] - tau * omega[0], p[1] - tau * omega[1]],
        e0,
        tau,
        tag,
        x: p,
        e,
        omega,
        r,
    }
}

/// Follow the characteristic through `(p, e)` backwards to the inflow boundary.
pub fn trace_characteristic(
    grid: &PhaseGrid,
    stopping: &StoppingModel,
    omega: [f64; 2],
    p: [f64; 2],
    e: f64,
) -> Result<CharacteristicTrace> {
    if !grid.contains(p[0], p[1], e) {
        return Err(Error::Input(format!(
            "point ({}, {}, {e}) lies outside the phase grid",
            p[0], p[1]
        )));
    }
    let norm = omega[0].hypot(omega[1]);
    if (norm - 1.0).abs() > crate::grid::UNIT_TOL {
        return Err(Error::Input(format!(
            "direction must be a unit vector, |ω| = {norm}"
        )));
    }
    let r = stopping.range(e);
    let r_top = stopping.range(grid.e_max());
    Ok(trace_with_range(grid, stopping, omega, p, e, r, r_top))
}

/// A point on the inflow boundary Γ₋ at which data is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflowPoint {
    pub x: [f64; 2],
    pub e: f64,
    pub direction: usize,
    pub omega: [f64; 2],
    pub face: EntryTag,
}

/// Gaussian pencil beam entering through the left face, carried by a single
/// discrete direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilBeam {
    pub y0: f64,
    pub sigma_y: f64,
    pub energy: f64,
    pub sigma_e: f64,
    pub amplitude: f64,
    /// Direction index carrying the beam.
    pub carrier: usize,
}

impl PencilBeam {
    pub fn eval(&self, pt: &InflowPoint) -> f64 {
        if pt.direction != self.carrier || pt.face != EntryTag::Spatial(Face::Left) {
            return 0.0;
        }
        let dy = (pt.x[1] - self.y0) / self.sigma_y;
        let de = (pt.e - self.energy) / self.sigma_e;
        self.amplitude * (-0.5 * (dy * dy + de * de)).exp()
    }
}

pub type InflowFn = Arc<dyn Fn(&InflowPoint) -> f64 + Send + Sync>;

/// Dirichlet data `g` on Γ₋.
#[derive(Clone)]
pub enum InflowData {
    Zero,
    PencilBeam(PencilBeam),
    Analytic(InflowFn),
}

impl std::fmt::Debug for InflowData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InflowData::Zero => write!(f, "Zero"),
            InflowData::PencilBeam(b) => f.debug_tuple("PencilBeam").field(b).finish(),
            InflowData::Analytic(_) => write!(f, "Analytic(..)"),
        }
    }
}

impl InflowData {
    #[inline]
    pub fn eval(&self, pt: &InflowPoint) -> f64 {
        match self {
            InflowData::Zero => 0.0,
            InflowData::PencilBeam(b) => b.eval(pt),
            InflowData::Analytic(f) => f(pt),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, InflowData::Zero)
    }
}

/// Right-hand side `G` of a single-direction solve.
#[derive(Clone, Copy)]
pub enum VolumetricSource<'a> {
    None,
    Constant(f64),
    Gridded(&'a DirectionalField),
    Analytic(&'a (dyn Fn([f64; 2], f64) -> f64 + Sync)),
}

impl<'a> VolumetricSource<'a> {
    fn is_none(&self) -> bool {
        matches!(self, VolumetricSource::None)
            || matches!(self, VolumetricSource::Constant(c) if *c == 0.0)
    }
}

/// Trilinear lookup: bilinear in space, linear in energy, clamped to the grid.
#[inline]
pub fn interpolate(grid: &PhaseGrid, field: &DirectionalField, p: [f64; 2], e: f64) -> f64 {
    let (nx, ny, ne) = (grid.nx(), grid.ny(), grid.ne());
    let locate = |v: f64, lo: f64, h: f64, n: usize| {
        let f = ((v - lo) / h).clamp(0.0, (n - 1) as f64);
        let i = (f as usize).min(n - 2);
        (i, f - i as f64)
    };
    let (k, tx) = locate(p[0], grid.x_min(), grid.dx, nx);
    let (l, ty) = locate(p[1], grid.y_min(), grid.dy, ny);
    let (m, te) = locate(e, grid.e_min(), grid.de, ne);
    let v = field.values();
    let idx = |k: usize, l: usize| (k * ny + l) * ne + m;
    let lerp_e = |i: usize| v[i] + te * (v[i + 1] - v[i]);
    let c00 = lerp_e(idx(k, l));
    let c01 = lerp_e(idx(k, l + 1));
    let c10 = lerp_e(idx(k + 1, l));
    let c11 = lerp_e(idx(k + 1, l + 1));
    let c0 = c00 + ty * (c01 - c00);
    let c1 = c10 + ty * (c11 - c10);
    c0 + tx * (c1 - c0)
}

/// Bilinear spatial lookup at energy node `m`.
#[inline]
fn interpolate_at_energy(grid: &PhaseGrid, field: &DirectionalField, p: [f64; 2], m: usize) -> f64 {
    let (nx, ny, ne) = (grid.nx(), grid.ny(), grid.ne());
    let locate = |v: f64, lo: f64, h: f64, n: usize| {
        let f = ((v - lo) / h).clamp(0.0, (n - 1) as f64);
        let i = (f as usize).min(n - 2);
        (i, f - i as f64)
    };
    let (k, tx) = locate(p[0], grid.x_min(), grid.dx, nx);
    let (l, ty) = locate(p[1], grid.y_min(), grid.dy, ny);
    let v = field.values();
    let at = |k: usize, l: usize| v[(k * ny + l) * ne + m];
    let c0 = at(k, l) + ty * (at(k, l + 1) - at(k, l));
    let c1 = at(k + 1, l) + ty * (at(k + 1, l + 1) - at(k + 1, l));
    c0 + tx * (c1 - c0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Source-quadrature step as a fraction of `min(Δx, Δy)`.
    pub source_step_factor: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            source_step_factor: 0.5,
        }
    }
}

impl SweepOptions {
    pub fn step(&self, grid: &PhaseGrid) -> f64 {
        self.source_step_factor * grid.dx.min(grid.dy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_step_factor.is_finite() && self.source_step_factor > 0.0 {
            Ok(())
        } else {
            Err(Error::Input("source step factor must be positive".into()))
        }
    }
}

/// The direction being swept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub index: usize,
    pub omega: [f64; 2],
}

/// Solve `ω·∇ψ - ∂_E(Sψ) + σ_T ψ = G` with `ψ = g` on Γ₋ at every node.
pub fn sweep_direction(
    grid: &PhaseGrid,
    stopping: &StoppingModel,
    removal: &Removal,
    dir: Direction,
    inflow: &InflowData,
    source: VolumetricSource<'_>,
    opts: &SweepOptions,
) -> Result<DirectionalField> {
    removal.validate()?;
    opts.validate()?;
    if let VolumetricSource::Gridded(f) = source {
        if f.dims() != grid.dims() {
            return Err(Error::Shape(
                "gridded source does not match the grid".into(),
            ));
        }
        if !f.is_finite() {
            return Err(Error::NonFinite(
                "volumetric source contains NaN or Inf".into(),
            ));
        }
    }
    let omega = dir.omega;
    let dims = grid.dims();
    let h_max = opts.step(grid);
    let r_nodes: Vec<f64> = grid.e.iter().map(|&e| stopping.range(e)).collect();
    let s_nodes: Vec<f64> = grid.e.iter().map(|&e| stopping.stopping(e)).collect();
    let r_top = r_nodes[dims.ne - 1];
    let no_source = source.is_none();
    let constant_removal = match removal {
        Removal::Constant(s) => Some(*s),
        Removal::Table(_) => None,
    };

    let mut values = vec![0.0; dims.len()];
    let chunk = dims.ny * dims.ne;
    values
        .par_chunks_mut(chunk)
        .enumerate()
        .try_for_each(|(k, slab)| -> Result<()> {
            let x = grid.x[k];
            for l in 0..dims.ny {
                let p = [x, grid.y[l]];
                for m in 0..dims.ne {
                    let e = grid.e[m];
                    let tr = trace_with_range(grid, stopping, omega, p, e, r_nodes[m], r_top);
                    let s_target = s_nodes[m];

                    let attenuation = |s: f64, acc: f64| match constant_removal {
                        Some(sig) => (-sig * s).exp(),
                        None => (-acc).exp(),
                    };

                    let mut value = 0.0;
                    let mut total_optical = 0.0;
                    if !no_source && tr.tau > 0.0 {
                        let n = (tr.tau / h_max).ceil().max(1.0) as usize;
                        let ds = tr.tau / n as f64;
                        let mut acc = 0.0;
                        for j in 0..n {
                            let s = (j as f64 + 0.5) * ds;
                            let pe = stopping.inverse_range(tr.r + s);
                            let ps = [p[0] - s * omega[0], p[1] - s * omega[1]];
                            let sig_here = if constant_removal.is_none() {
                                removal.at(pe)
                            } else {
                                0.0
                            };
                            let optical = acc + 0.5 * sig_here * ds;
                            let g = match source {
                                VolumetricSource::None => 0.0,
                                VolumetricSource::Constant(c) => c,
                                VolumetricSource::Gridded(f) => interpolate(grid, f, ps, pe),
                                VolumetricSource::Analytic(f) => f(ps, pe),
                            };
                            value +=
                                stopping.stopping(pe) / s_target * attenuation(s, optical) * g * ds;
                            acc += sig_here * ds;
                        }
                        total_optical = acc;
                    } else if constant_removal.is_none() && tr.tau > 0.0 {
                        for (_, _, pe, ds) in tr.samples(stopping, h_max) {
                            total_optical += removal.at(pe) * ds;
                        }
                    }

                    if !inflow.is_zero() {
                        let g = inflow.eval(&InflowPoint {
                            x: tr.x0,
                            e: tr.e0,
                            direction: dir.index,
                            omega,
                            face: tr.tag,
                        });
                        if g != 0.0 {
                            let ratio = stopping.stopping(tr.e0) / s_target;
                            value += ratio * attenuation(tr.tau, total_optical) * g;
                        }
                    }
                    if !value.is_finite() {
                        return Err(Error::NonFinite(format!(
                            "sweep produced {value} at node ({k}, {l}, {m})"
                        )));
                    }
                    slab[l * dims.ne + m] = value;
                }
            }
            Ok(())
        })?;
    DirectionalField::from_values(dims, values)
}

/// Straight-line streaming with removal and no energy coupling:
/// `ψ(x, E_m) = ∫₀^{τ_x} exp(-σ_m s) Q(x - sω, E_m) ds`, zero inflow.
pub fn sweep_streaming(
    grid: &PhaseGrid,
    removal: &[f64],
    omega: [f64; 2],
    source: &DirectionalField,
    opts: &SweepOptions,
) -> Result<DirectionalField> {
    opts.validate()?;
    let dims = grid.dims();
    if removal.len() != dims.ne {
        return Err(Error::Shape(format!(
            "{} removal values for {} energy nodes",
            removal.len(),
            dims.ne
        )));
    }
    if removal.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::Input(
            "removal must be finite and non-negative".into(),
        ));
    }
    if source.dims() != dims {
        return Err(Error::Shape(
            "streaming source does not match the grid".into(),
        ));
    }
    if !source.is_finite() {
        return Err(Error::NonFinite(
            "streaming source contains NaN or Inf".into(),
        ));
    }
    let h_max = opts.step(grid);
    let mut values = vec![0.0; dims.len()];
    let chunk = dims.ny * dims.ne;
    values
        .par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(k, slab)| {
            let x = grid.x[k];
            for l in 0..dims.ny {
                let p = [x, grid.y[l]];
                let (tau, _) = spatial_exit(grid, p, omega);
                if tau <= 0.0 || !tau.is_finite() {
                    continue;
                }
                let n = (tau / h_max).ceil().max(1.0) as usize;
                let ds = tau / n as f64;
                for j in 0..n {
                    let s = (j as f64 + 0.5) * ds;
                    let ps = [p[0] - s * omega[0], p[1] - s * omega[1]];
                    for m in 0..dims.ne {
                        let q = interpolate_at_energy(grid, source, ps, m);
                        slab[l * dims.ne + m] += (-removal[m] * s).exp() * q * ds;
                    }
                }
            }
        });
    DirectionalField::from_values(dims, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridConfig};
    use crate::physics::BraggKleemanModel;
    use approx::assert_relative_eq;

    fn grid(nx: usize, ne: usize, e_min: f64, e_max: f64) -> PhaseGrid {
        build_grid(&GridConfig {
            x_min: 0.0,
            x_max: 1.0,
            y_min: 0.0,
            y_max: 1.0,
            nx,
            ny: nx,
            e_min,
            e_max,
            ne,
        })
        .unwrap()
    }

    fn bk(alpha: f64, p: f64) -> StoppingModel {
        BraggKleemanModel::new(alpha, p).unwrap().into()
    }

    /// RK4 integration of dE/ds = +S(E) walking upstream, the oracle for the
    /// closed-form range map.
    fn integrate_energy(model: &StoppingModel, e: f64, tau: f64, steps: usize) -> f64 {
        let h = tau / steps as f64;
        let mut v = e;
        for _ in 0..steps {
            let k1 = model.stopping(v);
            let k2 = model.stopping(v + 0.5 * h * k1);
            let k3 = model.stopping(v + 0.5 * h * k2);
            let k4 = model.stopping(v + h * k3);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        v
    }

    #[test]
    fn trace_entry_energy_matches_ode() {
        let g = build_grid(&GridConfig {
            x_min: 0.0,
            x_max: 1.0,
            y_min: -1.0,
            y_max: 1.0,
            nx: 5,
            ny: 5,
            e_min: 0.5,
            e_max: 2.0,
            ne: 5,
        })
        .unwrap();
        let model = bk(0.01, 2.0);
        // x = 0.005 from the left face along ω = (1, 0)
        let tr = trace_characteristic(&g, &model, [1.0, 0.0], [0.005, 0.0], 1.0).unwrap();
        assert_eq!(tr.tag, EntryTag::Spatial(Face::Left));
        assert_relative_eq!(tr.tau, 0.005, max_relative = 1e-12);
        assert_relative_eq!(tr.e0, 1.5f64.sqrt(), max_relative = 1e-12);
        let ode = integrate_energy(&model, 1.0, 0.005, 2000);
        assert_relative_eq!(tr.e0, ode, max_relative = 1e-10);
        assert_relative_eq!(tr.e0, 1.224744871391589, max_relative = 1e-12);
    }

    #[test]
    fn trace_on_inflow_face_is_trivial() {
        let g = grid(5, 5, 1.0, 10.0);
        let model = bk(0.02, 1.7);
        let tr = trace_characteristic(&g, &model, [1.0, 0.0], [0.0, 0.5], 3.0).unwrap();
        assert_eq!(tr.tau, 0.0);
        assert_eq!(tr.e0, 3.0);
        assert_eq!(tr.x0, [0.0, 0.5]);
    }

    #[test]
    fn trace_linear_slowing_and_energy_top() {
        let g = grid(5, 5, 1.0, 100.0);
        let model = bk(0.05, 1.0);
        let tr = trace_characteristic(&g, &model, [1.0, 0.0], [0.4, 0.5], 3.0).unwrap();
        assert_relative_eq!(tr.e0, 3.0 + 0.4 / 0.05, max_relative = 1e-12);

        // Energy budget binds: R(E_max) - R(E) = 0.05 * 1 < 0.4
        let g = grid(5, 5, 1.0, 4.0);
        let tr = trace_characteristic(&g, &model, [1.0, 0.0], [0.4, 0.5], 3.95).unwrap();
        assert_eq!(tr.tag, EntryTag::EnergyTop);
        assert_eq!(tr.e0, 4.0);
        assert_relative_eq!(tr.tau, 0.05 * 0.05, max_relative = 1e-9);
    }

    #[test]
    fn trace_outside_domain_rejected() {
        let g = grid(5, 5, 1.0, 4.0);
        let model = bk(0.05, 1.0);
        assert!(trace_characteristic(&g, &model, [1.0, 0.0], [1.5, 0.5], 2.0).is_err());
        assert!(trace_characteristic(&g, &model, [1.0, 0.0], [0.5, 0.5], 5.0).is_err());
        assert!(trace_characteristic(&g, &model, [2.0, 0.0], [0.5, 0.5], 2.0).is_err());
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let g = grid(6, 5, 1.0, 10.0);
        let f = sweep_direction(
            &g,
            &bk(0.02, 1.7),
            &Removal::Constant(0.3),
            Direction {
                index: 0,
                omega: [0.6, 0.8],
            },
            &InflowData::Zero,
            VolumetricSource::None,
            &SweepOptions::default(),
        )
        .unwrap();
        assert!(f.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_source_closed_form() {
        // p = 1 gives constant S, so ψ at depth τ is c(1 - e^{-στ})/σ when the
        // energy budget does not bind.
        let g = grid(11, 5, 1.0, 1000.0);
        let model = bk(0.01, 1.0);
        let (c, sigma) = (2.5, 1.7);
        let f = sweep_direction(
            &g,
            &model,
            &Removal::Constant(sigma),
            Direction {
                index: 0,
                omega: [1.0, 0.0],
            },
            &InflowData::Zero,
            VolumetricSource::Constant(c),
            &SweepOptions::default(),
        )
        .unwrap();
        for k in 0..11 {
            let tau = g.x[k];
            let expected = c * (1.0 - (-sigma * tau).exp()) / sigma;
            // midpoint rule on an exponential: O(h²) error
            assert_relative_eq!(
                f.get(k, 3, 0),
                expected,
                max_relative = 2e-3,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn gridded_source_nan_is_an_error() {
        let g = grid(4, 4, 1.0, 10.0);
        let mut src = DirectionalField::zeros(g.dims());
        src.set(1, 1, 1, f64::NAN);
        let err = sweep_direction(
            &g,
            &bk(0.02, 1.7),
            &Removal::Constant(0.0),
            Direction {
                index: 0,
                omega: [1.0, 0.0],
            },
            &InflowData::Zero,
            VolumetricSource::Gridded(&src),
            &SweepOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));

        let nan_inflow = InflowData::Analytic(Arc::new(|_: &InflowPoint| f64::NAN));
        let err = sweep_direction(
            &g,
            &bk(0.02, 1.7),
            &Removal::Constant(0.0),
            Direction {
                index: 0,
                omega: [1.0, 0.0],
            },
            &nan_inflow,
            VolumetricSource::None,
            &SweepOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn interpolation_reproduces_trilinear_functions() {
        let g = grid(5, 4, 1.0, 4.0);
        let f_exact = |x: f64, y: f64, e: f64| 1.0 + 2.0 * x - y + 0.5 * e + 0.3 * x * y * e;
        let mut f = DirectionalField::zeros(g.dims());
        for k in 0..5 {
            for l in 0..5 {
                for m in 0..4 {
                    f.set(k, l, m, f_exact(g.x[k], g.y[l], g.e[m]));
                }
            }
        }
        for (x, y, e) in [
            (0.1, 0.9, 1.3),
            (0.55, 0.45, 3.9),
            (1.0, 1.0, 4.0),
            (0.0, 0.0, 1.0),
        ] {
            // exact at nodes and multilinear in each cell
            let v = interpolate(&g, &f, [x, y], e);
            let cell_exact = {
                // trilinear interpolation of x*y*e is exact only cellwise; compare
                // against the unique trilinear interpolant built from corners
                let fx = x / g.dx;
                let fy = y / g.dy;
                let fe = (e - 1.0) / g.de;
                let (k, l, m) = (
                    (fx as usize).min(3),
                    (fy as usize).min(3),
                    (fe as usize).min(2),
                );
                let (tx, ty, te) = (fx - k as f64, fy - l as f64, fe - m as f64);
                let mut acc = 0.0;
                for (a, wa) in [(0, 1.0 - tx), (1, tx)] {
                    for (b, wb) in [(0, 1.0 - ty), (1, ty)] {
                        for (c, wc) in [(0, 1.0 - te), (1, te)] {
                            acc += wa * wb * wc * f.get(k + a, l + b, m + c);
                        }
                    }
                }
                acc
            };
            assert_relative_eq!(v, cell_exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn streaming_unattenuated_segment() {
        let g = build_grid(&GridConfig {
            x_min: 0.0,
            x_max: 2.0,
            y_min: 0.0,
            y_max: 1.0,
            nx: 21,
            ny: 3,
            e_min: 1.0,
            e_max: 2.0,
            ne: 2,
        })
        .unwrap();
        let c = 3.0;
        let mut src = DirectionalField::zeros(g.dims());
        for k in 0..21 {
            // constant on [0.5, 1.5], exactly representable on the node grid
            if g.x[k] >= 0.5 - 1e-12 && g.x[k] <= 1.5 + 1e-12 {
                for l in 0..3 {
                    for m in 0..2 {
                        src.set(k, l, m, c);
                    }
                }
            }
        }
        let f =
            sweep_streaming(&g, &[0.0, 0.0], [1.0, 0.0], &src, &SweepOptions::default()).unwrap();
        // Downstream end of the plateau plus the linear ramps on either side
        // (piecewise-linear source: ramps of width Δx contribute c·Δx/2 each).
        let expected = c * 1.0 + c * g.dx;
        assert_relative_eq!(f.get(20, 1, 0), expected, max_relative = 1e-12);
    }
}
