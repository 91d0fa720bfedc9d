//! Lagged-gain source iteration over parallel directional sweeps, with
//! convergence diagnostics and contraction estimates.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::angular::{apply_gain, DirectionSet, TransferMatrix};
use crate::error::{Error, Result};
use crate::grid::{trapezoid_weights, AngularField, PhaseGrid};
use crate::physics::StoppingModel;
use crate::sweep::{
    sweep_direction, Direction, InflowData, Removal, SweepOptions, VolumetricSource,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Diagnostic {
    DeltaInf,
    WeightedL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TolMode {
    /// Compare against `tol` directly.
    Absolute,
    /// Compare against `tol` times the first recorded diagnostic.
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub diagnostic: Diagnostic,
    pub tol_mode: TolMode,
    /// Contraction factor for the a posteriori rule; the running estimate is
    /// used when absent.
    pub rho: Option<f64>,
    /// Stop on the a posteriori error bound instead of the raw diagnostic.
    pub aposteriori: bool,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            tol: 1e-8,
            max_iter: 200,
            diagnostic: Diagnostic::DeltaInf,
            tol_mode: TolMode::Relative,
            rho: None,
            aposteriori: false,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Input(format!(
                "TOL must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::Input("N_max must be at least 1".into()));
        }
        if let Some(r) = self.rho {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Input(format!("ρ must lie in (0, 1), got {r}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    pub diff_inf: f64,
    pub diff_wl2: f64,
    /// Wall time of this iteration.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub diagnostic: Diagnostic,
    /// Contraction estimate from the full history, when one is available.
    pub rho_hat: Option<f64>,
    /// Threshold the diagnostic was compared against.
    pub threshold: f64,
}

impl IterationReport {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn diagnostics(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| match self.diagnostic {
                Diagnostic::DeltaInf => r.diff_inf,
                Diagnostic::WeightedL2 => r.diff_wl2,
            })
            .collect()
    }

    pub fn last_delta_inf(&self) -> Option<f64> {
        self.records.last().map(|r| r.diff_inf)
    }

    /// `iter,diff_inf,diff_wl2,seconds`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,diff_inf,diff_wl2,seconds\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{}", r.n, r.diff_inf, r.diff_wl2, r.seconds);
        }
        s
    }

    /// Two-column history with a caller-chosen header for the difference.
    pub fn delta_inf_csv(&self, column: &str) -> String {
        let mut s = format!("iter,{column}\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{}", r.n, r.diff_inf);
        }
        s
    }
}

/// `max_i ‖u_i - v_i‖_∞`.
pub fn delta_inf(u: &AngularField, v: &AngularField) -> Result<f64> {
    if !u.same_shape(v) {
        return Err(Error::Shape("Δ∞ of fields with different shapes".into()));
    }
    Ok(u.components()
        .par_iter()
        .zip(v.components())
        .map(|(a, b)| {
            a.values()
                .iter()
                .zip(b.values())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        })
        .reduce(|| 0.0, f64::max))
}

/// Per-node weight `w_x w_y w_E (σ_T + |S'(E)|)` of the weighted L2 norm.
fn node_weights(grid: &PhaseGrid, sigma_t: f64, stopping: &StoppingModel) -> Result<Vec<f64>> {
    let wx = trapezoid_weights(&grid.x);
    let wy = trapezoid_weights(&grid.y);
    let we = trapezoid_weights(&grid.e);
    let mut coeff = Vec::with_capacity(grid.ne());
    for (&e, w) in grid.e.iter().zip(&we) {
        let neg_ds = -stopping.dstopping(e);
        if neg_ds < -1e-10 {
            return Err(Error::Stopping(format!(
                "stopping power increases at E = {e} (S' = {})",
                -neg_ds
            )));
        }
        coeff.push(w * (sigma_t + neg_ds.max(0.0)));
    }
    let mut out = Vec::with_capacity(grid.len());
    for a in &wx {
        for b in &wy {
            for c in &coeff {
                out.push(a * b * c);
            }
        }
    }
    Ok(out)
}

/// Discrete weighted-L2 surrogate of the graph norm (volume part only):
/// `(Σ_i ϖ_i Σ_nodes w [σ_T - S'(E)] (u - v)²)^{1/2}`.
pub fn weighted_l2_diff(
    u: &AngularField,
    v: &AngularField,
    sigma_t: f64,
    stopping: &StoppingModel,
    dirs: &DirectionSet,
    grid: &PhaseGrid,
) -> Result<f64> {
    let w = node_weights(grid, sigma_t, stopping)?;
    weighted_l2_with(u, v, &w, &dirs.varpi)
}

fn weighted_l2_with(u: &AngularField, v: &AngularField, w: &[f64], varpi: &[f64]) -> Result<f64> {
    if !u.same_shape(v) || varpi.len() != u.q() {
        return Err(Error::Shape("weighted L2 of mismatched fields".into()));
    }
    if u.dims().map(|d| d.len()) != Some(w.len()) {
        return Err(Error::Shape(
            "weighted L2 weights do not match the grid".into(),
        ));
    }
    let partial: Vec<f64> = u
        .components()
        .par_iter()
        .zip(v.components())
        .map(|(a, b)| {
            a.values()
                .iter()
                .zip(b.values())
                .zip(w)
                .map(|((x, y), w)| w * (x - y) * (x - y))
                .sum::<f64>()
        })
        .collect();
    Ok(partial
        .iter()
        .zip(varpi)
        .map(|(p, v)| p * v)
        .sum::<f64>()
        .sqrt())
}

/// Geometric mean of successive ratios over the last half of the
/// pre-plateau history. Entries below `100 ε · max` count as plateau.
pub fn estimate_contraction_from(diags: &[f64]) -> Result<f64> {
    let peak = diags.iter().cloned().fold(0.0f64, f64::max);
    let floor = 100.0 * f64::EPSILON * peak;
    let usable: Vec<f64> = diags.iter().copied().take_while(|d| *d > floor).collect();
    if usable.len() < 4 {
        return Err(Error::Input(format!(
            "need at least 4 positive pre-plateau diagnostics, have {}",
            usable.len()
        )));
    }
    let ratios: Vec<f64> = usable.windows(2).map(|w| w[1] / w[0]).collect();
    let take = ratios.len().div_ceil(2);
    let tail = &ratios[ratios.len() - take..];
    Ok((tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp())
}

pub fn estimate_contraction(report: &IterationReport) -> Result<f64> {
    estimate_contraction_from(&report.diagnostics())
}

/// `ρ/(1-ρ) · diff`, the a posteriori bound on the distance to the fixed point.
pub fn aposteriori_bound(rho: f64, diff: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Input(format!(
            "a posteriori bound needs 0 < ρ < 1, got {rho}"
        )));
    }
    Ok(rho / (1.0 - rho) * diff)
}

/// Everything a source-iteration solve needs besides its configuration.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub grid: &'a PhaseGrid,
    pub stopping: &'a StoppingModel,
    pub dirs: &'a DirectionSet,
    pub transfer: &'a TransferMatrix,
    pub inflow: &'a InflowData,
    pub extra_source: Option<&'a AngularField>,
    pub sweep: SweepOptions,
}

fn sweep_all(problem: &Problem<'_>, gain: Option<&AngularField>) -> Result<AngularField> {
    let removal = Removal::Constant(problem.transfer.sigma_t());
    let q = problem.dirs.q();
    let comps = (0..q)
        .into_par_iter()
        .map(|i| {
            let src = match gain {
                Some(g) => VolumetricSource::Gridded(g.component(i)),
                None => match problem.extra_source {
                    Some(s) => VolumetricSource::Gridded(s.component(i)),
                    None => VolumetricSource::None,
                },
            };
            sweep_direction(
                problem.grid,
                problem.stopping,
                &removal,
                Direction {
                    index: i,
                    omega: problem.dirs.omega[i],
                },
                problem.inflow,
                src,
                &problem.sweep,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    AngularField::from_components(comps)
}

/// Run source iteration; see [`source_iterate_observed`].
pub fn source_iterate(
    problem: &Problem<'_>,
    cfg: &IterationConfig,
) -> Result<(AngularField, IterationReport)> {
    source_iterate_observed(problem, cfg, |_, _| {})
}

/// Source iteration starting from the ballistic sweep (zero gain). Each step
/// assembles the gain from the previous iterate, adds any extra source and
/// sweeps every direction. `observer` sees each iterate, starting with the
/// ballistic one at `n = 0`.
pub fn source_iterate_observed(
    problem: &Problem<'_>,
    cfg: &IterationConfig,
    mut observer: impl FnMut(usize, &AngularField),
) -> Result<(AngularField, IterationReport)> {
    cfg.validate()?;
    let q = problem.dirs.q();
    if problem.transfer.q() != q {
        return Err(Error::Shape(format!(
            "transfer matrix has {} directions, direction set has {q}",
            problem.transfer.q()
        )));
    }
    if let Some(src) = problem.extra_source {
        if src.q() != q || src.dims() != Some(problem.grid.dims()) {
            return Err(Error::Shape(
                "extra source does not match the problem".into(),
            ));
        }
    }
    let weights = node_weights(problem.grid, problem.transfer.sigma_t(), problem.stopping)?;

    let mut current = sweep_all(problem, None)?;
    observer(0, &current);

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut threshold = cfg.tol;
    let pick = |r: &IterationRecord| match cfg.diagnostic {
        Diagnostic::DeltaInf => r.diff_inf,
        Diagnostic::WeightedL2 => r.diff_wl2,
    };

    for n in 1..=cfg.max_iter {
        let start = Instant::now();
        let mut gain = apply_gain(problem.transfer, &current)?;
        if let Some(extra) = problem.extra_source {
            for (g, e) in gain.components_mut().iter_mut().zip(extra.components()) {
                for (a, b) in g.values_mut().iter_mut().zip(e.values()) {
                    *a += b;
                }
            }
        }
        let next = sweep_all(problem, Some(&gain))?;
        let diff_inf = delta_inf(&next, &current)?;
        let diff_wl2 = weighted_l2_with(&next, &current, &weights, &problem.dirs.varpi)?;
        let rec = IterationRecord {
            n,
            diff_inf,
            diff_wl2,
            seconds: start.elapsed().as_secs_f64(),
        };
        records.push(rec);
        current = next;
        observer(n, &current);

        if n == 1 && cfg.tol_mode == TolMode::Relative {
            threshold = cfg.tol * pick(&rec);
        }
        let diag = pick(&rec);
        let stop = if cfg.aposteriori {
            let rho = cfg.rho.or_else(|| {
                (n >= 4)
                    .then(|| {
                        estimate_contraction_from(&records.iter().map(pick).collect::<Vec<_>>())
                            .ok()
                    })
                    .flatten()
                    .filter(|r| *r < 1.0)
            });
            match rho {
                Some(r) => aposteriori_bound(r, diag)? <= threshold,
                None => diag <= threshold,
            }
        } else {
            diag <= threshold
        };
        if stop {
            converged = true;
            break;
        }
        if n > 5 {
            let before = pick(&records[n - 6]);
            if diag > 10.0 * before && before > 0.0 {
                return Err(Error::Divergent(format!(
                    "diagnostic grew from {before:e} to {diag:e} over 5 iterations (n = {n})"
                )));
            }
        }
    }
    let diags: Vec<f64> = records.iter().map(pick).collect();
    let rho_hat = estimate_contraction_from(&diags).ok();
    Ok((
        current,
        IterationReport {
            records,
            converged,
            diagnostic: cfg.diagnostic,
            rho_hat,
            threshold,
        },
    ))
}
