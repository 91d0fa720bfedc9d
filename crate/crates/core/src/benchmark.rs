//! Exact ballistic solution and the single-species experiment harnesses:
//! grid refinement against the exact solution, iteration convergence,
//! Henyey–Greenstein broadening, angular resolution and scattering coupling.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::angular::{
    build_direction_set, build_transfer_matrix, DirectionSet, ScatterKernelSpec, TransferMatrix,
};
use crate::error::{Error, Result};
use crate::grid::{build_grid, AngularField, DirectionalField, GridConfig, PhaseGrid};
use crate::iteration::{source_iterate, IterationConfig, IterationReport, Problem, TolMode};
use crate::observables::{beam_width, dose, relative_linf_error, BeamWidth, DoseField};
use crate::output::{read_table, write_text};
use crate::physics::{BraggKleemanModel, StoppingModel};
use crate::sweep::{trace_characteristic, InflowData, InflowPoint, PencilBeam, SweepOptions};

/// Gaussian beam on the left face, carried by the central ordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    pub y0: f64,
    pub sigma_y: f64,
    pub energy: f64,
    pub sigma_e: f64,
    /// Angle-integrated peak fluence; divided by the carrier weight so the
    /// dose does not depend on Q.
    pub amplitude: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        BeamSpec {
            y0: 0.0,
            sigma_y: 0.3,
            energy: 50.0,
            sigma_e: 3.0,
            amplitude: 1.0,
        }
    }
}

impl BeamSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_y > 0.0 && self.sigma_e > 0.0 && self.energy > 0.0 && self.amplitude >= 0.0)
        {
            return Err(Error::Input(format!("invalid beam {self:?}")));
        }
        Ok(())
    }

    pub fn pencil(&self, dirs: &DirectionSet) -> PencilBeam {
        let c = dirs.central();
        PencilBeam {
            y0: self.y0,
            sigma_y: self.sigma_y,
            energy: self.energy,
            sigma_e: self.sigma_e,
            amplitude: self.amplitude / dirs.varpi[c],
            carrier: c,
        }
    }
}

/// Physics, discretisation and solver settings shared by all single-species runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub grid: GridConfig,
    pub stopping: BraggKleemanModel,
    pub q: usize,
    pub theta_c: f64,
    pub axis: f64,
    pub kernel: ScatterKernelSpec,
    /// Removal override; defaults to the elastic rate.
    pub sigma_t: Option<f64>,
    pub beam: BeamSpec,
    pub iteration: IterationConfig,
    pub sweep: SweepOptions,
}

impl Default for Setup {
    fn default() -> Self {
        Setup {
            grid: GridConfig::default(),
            stopping: BraggKleemanModel::proton_water(),
            q: 33,
            theta_c: PI / 2.0,
            axis: 0.0,
            kernel: ScatterKernelSpec::HenyeyGreenstein {
                sigma_el: 1.5,
                gamma: 0.9,
            },
            sigma_t: None,
            beam: BeamSpec::default(),
            iteration: IterationConfig::default(),
            sweep: SweepOptions::default(),
        }
    }
}

impl Setup {
    /// Stable text description used for cache fingerprints and metadata.
    pub fn fingerprint_text(&self) -> String {
        format!("{}|{:?}", env!("CARGO_PKG_VERSION"), self)
    }

    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.fingerprint_text().as_bytes());
        digest.iter().take(12).map(|b| format!("{b:02x}")).collect()
    }

    /// Depth of the distal end of the beam's range, measured from the inflow face.
    pub fn beam_range(&self) -> f64 {
        self.stopping.range_unchecked(self.beam.energy)
            - self.stopping.range_unchecked(self.grid.e_min)
    }
}

/// A fully assembled single-species problem.
pub struct Assembled {
    pub grid: PhaseGrid,
    pub stopping: StoppingModel,
    pub dirs: DirectionSet,
    pub transfer: TransferMatrix,
    pub inflow: InflowData,
    pub sweep: SweepOptions,
}

impl Assembled {
    pub fn new(setup: &Setup) -> Result<Self> {
        setup.beam.validate()?;
        let grid = build_grid(&setup.grid)?;
        let stopping: StoppingModel = setup.stopping.into();
        stopping.check_admissible(&grid.e)?;
        let dirs = build_direction_set(setup.q, setup.theta_c, setup.axis)?;
        let mut transfer = build_transfer_matrix(&setup.kernel, &dirs)?;
        if let Some(s) = setup.sigma_t {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Input(format!("σ_T must be non-negative, got {s}")));
            }
            transfer = transfer.with_sigma_t(s);
        }
        let inflow = InflowData::PencilBeam(setup.beam.pencil(&dirs));
        Ok(Assembled {
            grid,
            stopping,
            dirs,
            transfer,
            inflow,
            sweep: setup.sweep,
        })
    }

    pub fn problem(&self) -> Problem<'_> {
        Problem {
            grid: &self.grid,
            stopping: &self.stopping,
            dirs: &self.dirs,
            transfer: &self.transfer,
            inflow: &self.inflow,
            extra_source: None,
            sweep: self.sweep,
        }
    }

    pub fn dose(&self, psi: &AngularField) -> Result<DoseField> {
        dose(
            psi,
            |e| self.stopping.stopping(e),
            &self.dirs.varpi,
            &self.grid,
        )
    }
}

/// A converged solve with its dose.
pub struct Solved {
    pub assembled: Assembled,
    pub psi: AngularField,
    pub report: IterationReport,
    pub dose: DoseField,
}

pub fn solve(setup: &Setup) -> Result<Solved> {
    let assembled = Assembled::new(setup)?;
    let (psi, report) = source_iterate(&assembled.problem(), &setup.iteration)?;
    let dose = assembled.dose(&psi)?;
    Ok(Solved {
        assembled,
        psi,
        report,
        dose,
    })
}

/// Closed-form solution of the ballistic Bragg–Kleeman problem in which
/// elastic gain and loss cancel.
#[derive(Debug, Clone)]
pub struct ExactBallisticSolution {
    pub model: BraggKleemanModel,
    pub inflow: InflowData,
}

/// `ψ = E₀^{1-p} E^{p-1} g(x₀, E₀, ω)` with `E₀^p = E^p + τ/α`, where `x₀`
/// and `τ` come from tracing the characteristic back to the inflow boundary.
pub fn exact_psi(
    sol: &ExactBallisticSolution,
    grid: &PhaseGrid,
    x: [f64; 2],
    e: f64,
    direction: usize,
    omega: [f64; 2],
) -> Result<f64> {
    let stopping: StoppingModel = sol.model.into();
    let tr = trace_characteristic(grid, &stopping, omega, x, e)?;
    let (alpha, p) = (sol.model.alpha(), sol.model.p());
    let e0 = (e.powf(p) + tr.tau / alpha).powf(1.0 / p);
    let g = sol.inflow.eval(&InflowPoint {
        x: tr.x0,
        e: e0,
        direction,
        omega,
        face: tr.tag,
    });
    Ok(e0.powf(1.0 - p) * e.powf(p - 1.0) * g)
}

fn exact_field(
    sol: &ExactBallisticSolution,
    grid: &PhaseGrid,
    dirs: &DirectionSet,
) -> Result<AngularField> {
    let comps = (0..dirs.q())
        .map(|i| {
            let mut f = DirectionalField::zeros(grid.dims());
            for k in 0..grid.nx() {
                for l in 0..grid.ny() {
                    for m in 0..grid.ne() {
                        f.set(
                            k,
                            l,
                            m,
                            exact_psi(
                                sol,
                                grid,
                                [grid.x[k], grid.y[l]],
                                grid.e[m],
                                i,
                                dirs.omega[i],
                            )?,
                        );
                    }
                }
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    AngularField::from_components(comps)
}

/// Parameter lists of the studies.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub setup: Setup,
    /// Grid ladder `(Nx, Ny, NE)` of the refinement study.
    pub levels: Vec<[usize; 3]>,
    pub gammas: Vec<f64>,
    pub q_list: Vec<usize>,
    pub theta_list: Vec<f64>,
    /// Ordinates-study reference.
    pub q_ref: usize,
    /// Cone-study reference.
    pub q_ref_cone: usize,
    pub q_star: usize,
    pub theta_max: f64,
    /// Depth of the beam-width diagnostic; half the beam range when absent.
    pub x_dagger: Option<f64>,
    pub out_dir: Option<PathBuf>,
    /// Where reference doses are cached; no caching when absent.
    pub cache_dir: Option<PathBuf>,
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec {
            setup: Setup::default(),
            levels: vec![[9, 9, 5], [17, 17, 9], [33, 33, 17], [65, 65, 33]],
            gammas: vec![0.95, 0.90, 0.85, 0.80],
            q_list: vec![3, 5, 9, 17, 33, 65],
            theta_list: vec![PI / 8.0, PI / 4.0, 3.0 * PI / 8.0, PI / 2.0],
            q_ref: 257,
            q_ref_cone: 129,
            q_star: 33,
            theta_max: PI / 2.0,
            x_dagger: None,
            out_dir: None,
            cache_dir: None,
        }
    }
}

impl StudySpec {
    /// Defaults of a numbered study (1 to 5). The broadening and angular
    /// studies run on a coarser 25×25×13 grid; the coupling study stops on an
    /// absolute Δ∞.
    pub fn for_experiment(id: u8) -> Result<StudySpec> {
        let mut spec = StudySpec::default();
        match id {
            1 | 2 => {}
            3 | 4 => {
                spec.setup.grid.nx = 25;
                spec.setup.grid.ny = 25;
                spec.setup.grid.ne = 13;
            }
            5 => {
                spec.gammas = vec![0.0, 0.7, 0.9, 0.99];
                spec.setup.iteration.tol_mode = TolMode::Absolute;
                spec.setup.iteration.tol = 1e-8;
            }
            _ => {
                return Err(Error::Input(format!(
                    "no single-species study numbered {id}"
                )))
            }
        }
        Ok(spec)
    }

    pub fn x_dagger(&self) -> f64 {
        self.x_dagger
            .unwrap_or_else(|| self.setup.grid.x_min + 0.5 * self.setup.beam_range())
    }

    fn emit(&self, name: &str, content: &str) -> Result<()> {
        if let Some(dir) = &self.out_dir {
            write_text(&dir.join(name), content)?;
        }
        Ok(())
    }

    /// Setup of the refinement study: Dirac kernel, removal equal to the
    /// elastic rate, a single forward ordinate.
    pub fn benchmark_setup(&self, level: [usize; 3]) -> Setup {
        let mut s = self.setup.clone();
        s.grid.nx = level[0];
        s.grid.ny = level[1];
        s.grid.ne = level[2];
        s.kernel = ScatterKernelSpec::Dirac {
            sigma_el: self.setup.kernel.sigma_el(),
        };
        s.sigma_t = None;
        s.q = 1;
        s
    }
}

/// Metadata lines `key = value` describing an experiment's settings.
pub type Metadata = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq)]
pub struct GridStudyRow {
    pub nx: usize,
    pub ny: usize,
    pub ne: usize,
    pub max_rel_to_peak: f64,
    pub iterations: usize,
}

impl GridStudyRow {
    pub fn unknowns(&self) -> usize {
        self.nx * self.ny * self.ne
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridStudy {
    pub rows: Vec<GridStudyRow>,
    /// Least-squares slope of log error against log N.
    pub slope: f64,
    pub metadata: Metadata,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Input(
            "slope needs at least two paired points".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Input("log-log slope needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

pub fn run_experiment_1(spec: &StudySpec) -> Result<GridStudy> {
    if spec.levels.is_empty() {
        return Err(Error::Input(
            "refinement study needs at least one grid level".into(),
        ));
    }
    let mut rows = Vec::new();
    for &level in &spec.levels {
        let setup = spec.benchmark_setup(level);
        let solved = solve(&setup)?;
        let a = &solved.assembled;
        let exact = ExactBallisticSolution {
            model: setup.stopping,
            inflow: a.inflow.clone(),
        };
        let psi_exact = exact_field(&exact, &a.grid, &a.dirs)?;
        let d_exact = a.dose(&psi_exact)?;
        rows.push(GridStudyRow {
            nx: level[0],
            ny: level[1],
            ne: level[2],
            max_rel_to_peak: relative_linf_error(&solved.dose, &d_exact)?,
            iterations: solved.report.iterations(),
        });
    }
    let slope = if rows.len() >= 2 {
        let n: Vec<f64> = rows.iter().map(|r| r.unknowns() as f64).collect();
        let e: Vec<f64> = rows.iter().map(|r| r.max_rel_to_peak).collect();
        loglog_slope(&n, &e)?
    } else {
        f64::NAN
    };
    let mut csv = String::from("Nx,Ny,Ne,max_rel_to_peak\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.nx, r.ny, r.ne, r.max_rel_to_peak);
    }
    spec.emit("benchmark_grid_study.csv", &csv)?;
    let metadata = vec![
        ("exp1.loglog_slope".into(), slope.to_string()),
        (
            "exp1.iterations".into(),
            rows.iter()
                .map(|r| r.iterations.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        ),
    ];
    Ok(GridStudy {
        rows,
        slope,
        metadata,
    })
}

pub struct IterationStudy {
    pub solved: Solved,
    pub rho_hat: Option<f64>,
    pub metadata: Metadata,
}

/// Finest-level refinement grid with the configured scattering kernel.
pub fn run_experiment_2(spec: &StudySpec) -> Result<IterationStudy> {
    let solved = solve(&spec.setup)?;
    spec.emit(
        "benchmark_finest_iter_history.csv",
        &solved.report.delta_inf_csv("diff_inf"),
    )?;
    spec.emit("iteration_history_full.csv", &solved.report.history_csv())?;
    let rho_hat = solved.report.rho_hat;
    let metadata = vec![
        (
            "exp2.rho_hat".into(),
            rho_hat.map_or("unavailable".into(), |r| r.to_string()),
        ),
        (
            "exp2.iterations".into(),
            solved.report.iterations().to_string(),
        ),
        ("exp2.converged".into(), solved.report.converged.to_string()),
    ];
    Ok(IterationStudy {
        solved,
        rho_hat,
        metadata,
    })
}

fn gamma_label(g: f64) -> String {
    format!("{g:.2}")
}

fn with_gamma(setup: &Setup, gamma: f64) -> Setup {
    let mut s = setup.clone();
    s.kernel = ScatterKernelSpec::HenyeyGreenstein {
        sigma_el: setup.kernel.sigma_el(),
        gamma,
    };
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadeningRow {
    pub gamma: f64,
    pub width: BeamWidth,
    pub iterations: usize,
    pub min_dose: f64,
}

pub struct BroadeningStudy {
    pub rows: Vec<BroadeningRow>,
    pub metadata: Metadata,
}

pub fn run_experiment_3(spec: &StudySpec) -> Result<BroadeningStudy> {
    if spec.gammas.is_empty() {
        return Err(Error::Input("γ list is empty".into()));
    }
    let x_dagger = spec.x_dagger();
    let mut rows = Vec::new();
    let mut csv = String::from("gamma,W,ybar,x_cm,n_iter\n");
    for &g in &spec.gammas {
        let solved = solve(&with_gamma(&spec.setup, g))?;
        spec.emit(
            &format!("hg_dose_gamma_{}.csv", gamma_label(g)),
            &solved.dose.to_csv_string(),
        )?;
        let w = beam_width(&solved.dose, x_dagger)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            g,
            w.width,
            w.centroid,
            w.x,
            solved.report.iterations()
        );
        rows.push(BroadeningRow {
            gamma: g,
            width: w,
            iterations: solved.report.iterations(),
            min_dose: solved
                .dose
                .values
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min),
        });
    }
    spec.emit("hg_beam_width.csv", &csv)?;
    Ok(BroadeningStudy {
        rows,
        metadata: vec![("exp3.x_dagger".into(), x_dagger.to_string())],
    })
}

fn angular_setup(setup: &Setup, q: usize, theta_c: f64) -> Setup {
    let mut s = setup.clone();
    s.q = q;
    s.theta_c = theta_c;
    s
}

/// Dose of a setup, read from or written to the reference cache.
pub fn reference_dose(setup: &Setup, cache_dir: Option<&Path>) -> Result<(DoseField, bool)> {
    let path = cache_dir.map(|d| d.join(format!("reference_dose_{}.csv", setup.fingerprint())));
    if let Some(p) = &path {
        if p.exists() {
            if let Ok(d) = read_dose_csv(p, &setup.grid) {
                return Ok((d, true));
            }
        }
    }
    let solved = solve(setup).map_err(|e| match e {
        Error::Divergent(m) => Error::Divergent(format!("reference run (Q = {}): {m}", setup.q)),
        other => Error::Input(format!(
            "reference run (Q = {}, θ_c = {}) failed: {other}",
            setup.q, setup.theta_c
        )),
    })?;
    if let Some(p) = &path {
        write_text(p, &solved.dose.to_csv_string())?;
    }
    Ok((solved.dose, false))
}

/// Parse a `x_cm,y_cm,dose` file produced on `grid`.
pub fn read_dose_csv(path: &Path, grid: &GridConfig) -> Result<DoseField> {
    let table = read_table(path)?;
    if table.header != ["x_cm", "y_cm", "dose"] {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            msg: format!("unexpected header {:?}", table.header),
        });
    }
    let g = build_grid(grid)?;
    let mut d = DoseField::zeros(&g);
    if table.rows.len() != d.values.len() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            msg: format!(
                "expected {} rows, found {}",
                d.values.len(),
                table.rows.len()
            ),
        });
    }
    for (n, row) in table.rows.iter().enumerate() {
        let (k, l) = (n / g.ny(), n % g.ny());
        if row[0] != g.x[k] || row[1] != g.y[l] {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                msg: format!("row {} is not at node ({k}, {l})", n + 2),
            });
        }
        d.values[n] = row[2];
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrdinatesRow {
    pub q: usize,
    pub e_inf: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeRow {
    pub theta_c: f64,
    pub e_inf_fullref: f64,
    pub e_inf_coneref: f64,
}

pub struct AngularStudy {
    pub ordinates: Vec<OrdinatesRow>,
    pub cone: Vec<ConeRow>,
    pub metadata: Metadata,
}

pub fn run_experiment_4(spec: &StudySpec) -> Result<AngularStudy> {
    if spec.q_list.is_empty() || spec.theta_list.is_empty() {
        return Err(Error::Input(
            "angular study needs non-empty Q and θ_c lists".into(),
        ));
    }
    let cache = spec.cache_dir.as_deref();
    let x_dagger = spec.x_dagger();
    let mut cache_hits = 0usize;

    let (d_ref, hit) = reference_dose(
        &angular_setup(&spec.setup, spec.q_ref, spec.theta_max),
        cache,
    )?;
    cache_hits += hit as usize;
    let mut ordinates = Vec::new();
    let mut csv = String::from("Q,E_inf,W\n");
    for &q in &spec.q_list {
        let d = solve(&angular_setup(&spec.setup, q, spec.theta_max))?.dose;
        let row = OrdinatesRow {
            q,
            e_inf: relative_linf_error(&d, &d_ref)?,
            width: beam_width(&d, x_dagger)?.width,
        };
        let _ = writeln!(csv, "{},{},{}", row.q, row.e_inf, row.width);
        ordinates.push(row);
    }
    spec.emit("angular_Q_study.csv", &csv)?;

    let (d_full, hit) = reference_dose(
        &angular_setup(&spec.setup, spec.q_ref_cone, spec.theta_max),
        cache,
    )?;
    cache_hits += hit as usize;
    let mut cone = Vec::new();
    let mut csv = String::from("theta_c,E_inf_fullref,E_inf_coneref\n");
    for &theta in &spec.theta_list {
        let d = solve(&angular_setup(&spec.setup, spec.q_star, theta))?.dose;
        let d_cone = if theta == spec.theta_max {
            d_full.clone()
        } else {
            let (d, hit) =
                reference_dose(&angular_setup(&spec.setup, spec.q_ref_cone, theta), cache)?;
            cache_hits += hit as usize;
            d
        };
        let row = ConeRow {
            theta_c: theta,
            e_inf_fullref: relative_linf_error(&d, &d_full)?,
            e_inf_coneref: relative_linf_error(&d, &d_cone)?,
        };
        let _ = writeln!(
            csv,
            "{},{},{}",
            row.theta_c, row.e_inf_fullref, row.e_inf_coneref
        );
        cone.push(row);
    }
    spec.emit("angular_cone_study.csv", &csv)?;
    Ok(AngularStudy {
        ordinates,
        cone,
        metadata: vec![
            ("exp4.x_dagger".into(), x_dagger.to_string()),
            ("exp4.reference_cache_hits".into(), cache_hits.to_string()),
        ],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRow {
    pub gamma: f64,
    pub n_iter: usize,
    pub last_delta_inf: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

pub struct CouplingStudy {
    pub rows: Vec<CouplingRow>,
    pub metadata: Metadata,
}

/// Iteration counts to a fixed absolute tolerance on Δ∞ for each γ.
pub fn run_experiment_5(spec: &StudySpec) -> Result<CouplingStudy> {
    if spec.gammas.is_empty() {
        return Err(Error::Input("γ list is empty".into()));
    }
    let mut rows = Vec::new();
    let mut csv = String::from("gamma,n_iter,last_Delta_inf\n");
    for &g in &spec.gammas {
        let solved = solve(&with_gamma(&spec.setup, g))?;
        let rep = &solved.report;
        spec.emit(
            &format!("SI_gamma_history_{}.csv", gamma_label(g)),
            &rep.delta_inf_csv("Delta_inf"),
        )?;
        let row = CouplingRow {
            gamma: g,
            n_iter: rep.iterations(),
            last_delta_inf: rep.last_delta_inf().unwrap_or(0.0),
            converged: rep.converged,
            history: rep.records.iter().map(|r| r.diff_inf).collect(),
        };
        let _ = writeln!(csv, "{},{},{}", row.gamma, row.n_iter, row.last_delta_inf);
        rows.push(row);
    }
    spec.emit("SI_gamma_counts.csv", &csv)?;
    Ok(CouplingStudy {
        rows,
        metadata: vec![(
            "exp5.tol_mode".into(),
            match spec.setup.iteration.tol_mode {
                TolMode::Absolute => "absolute".into(),
                TolMode::Relative => "relative".into(),
            },
        )],
    })
}
