//! Carbon-ion primary transport with one-way production of secondary protons
//! (slowed down along characteristics) and neutrons (streaming with removal).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::angular::{build_direction_set, DirectionSet, ScatterKernelSpec};
use crate::benchmark::{Assembled, BeamSpec, Metadata, Setup};
use crate::error::{Error, Result};
use crate::grid::{
    build_grid, trapezoid_weights, AngularField, DirectionalField, GridConfig, PhaseGrid,
};
use crate::iteration::{source_iterate, IterationConfig, IterationReport};
use crate::observables::{depth_dose, dose, DepthDoseCurve, DoseField};
use crate::output::write_text;
use crate::physics::{
    fit_bragg_kleeman, fit_tabulated_stopping, BraggKleemanModel, Interval, RangeEnergyTable,
    StoppingModel, TabulatedStoppingModel,
};
use crate::sweep::{
    sweep_direction, sweep_streaming, Direction, InflowData, Removal, SweepOptions,
    VolumetricSource,
};

/// A non-negative function of energy: constant or piecewise linear through
/// tabulated points, clamped outside them.
#[derive(Debug, Clone, PartialEq)]
pub enum Rate {
    Constant(f64),
    Table { energy: Vec<f64>, value: Vec<f64> },
}

impl Rate {
    pub fn validate(&self, what: &str) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            Rate::Constant(c) if !ok(*c) => Err(Error::Input(format!(
                "{what} must be non-negative, got {c}"
            ))),
            Rate::Constant(_) => Ok(()),
            Rate::Table { energy, value } => {
                if energy.is_empty() || energy.len() != value.len() {
                    return Err(Error::Input(format!(
                        "{what}: table needs matching non-empty columns"
                    )));
                }
                if energy.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Input(format!(
                        "{what}: energies must increase strictly"
                    )));
                }
                if !value.iter().all(|v| ok(*v)) {
                    return Err(Error::Input(format!("{what}: values must be non-negative")));
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, e: f64) -> f64 {
        match self {
            Rate::Constant(c) => *c,
            Rate::Table { energy, value } => {
                let n = energy.len();
                if e <= energy[0] {
                    return value[0];
                }
                if e >= energy[n - 1] {
                    return value[n - 1];
                }
                let j = energy.partition_point(|v| *v <= e) - 1;
                let t = (e - energy[j]) / (energy[j + 1] - energy[j]);
                value[j] + t * (value[j + 1] - value[j])
            }
        }
    }
}

/// Emitted energy density of a secondary species.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    /// Gaussian restricted to the species' energy interval and renormalised.
    TruncatedGaussian {
        mean: f64,
        std: f64,
    },
    Uniform,
    /// User density; must already integrate to one on the energy grid.
    Table {
        energy: Vec<f64>,
        value: Vec<f64>,
    },
}

const NORMALISATION_TOL: f64 = 1e-8;

impl Spectrum {
    /// Nodal values on `nodes`, with unit trapezoid integral.
    pub fn on_nodes(&self, nodes: &[f64]) -> Result<Vec<f64>> {
        let w = trapezoid_weights(nodes);
        let raw: Vec<f64> = match self {
            Spectrum::TruncatedGaussian { mean, std } => {
                if !(*std > 0.0) {
                    return Err(Error::Input(format!(
                        "spectrum width must be positive, got {std}"
                    )));
                }
                nodes
                    .iter()
                    .map(|e| (-0.5 * ((e - mean) / std).powi(2)).exp())
                    .collect()
            }
            Spectrum::Uniform => vec![1.0; nodes.len()],
            Spectrum::Table { energy, value } => {
                let r = Rate::Table {
                    energy: energy.clone(),
                    value: value.clone(),
                };
                r.validate("emission spectrum")?;
                let v: Vec<f64> = nodes.iter().map(|e| r.at(*e)).collect();
                let mass: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
                if (mass - 1.0).abs() > NORMALISATION_TOL {
                    return Err(Error::Input(format!(
                        "emission spectrum integrates to {mass} on the energy grid, expected 1"
                    )));
                }
                return Ok(v);
            }
        };
        let mass: f64 = raw.iter().zip(&w).map(|(a, b)| a * b).sum();
        if !(mass > 0.0) {
            return Err(Error::Input(
                "emission spectrum has no mass on the energy grid".into(),
            ));
        }
        Ok(raw.into_iter().map(|v| v / mass).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondarySourceSpec {
    /// Macroscopic nuclear interaction rate (1/cm).
    pub sigma_nuc: Rate,
    pub yield_p: f64,
    pub yield_n: f64,
    pub w_p: Spectrum,
    pub w_n: Spectrum,
}

impl SecondarySourceSpec {
    pub fn validate(&self) -> Result<()> {
        self.sigma_nuc.validate("Σ_nuc")?;
        for (name, y) in [("Y_P", self.yield_p), ("Y_N", self.yield_n)] {
            if !(y.is_finite() && y >= 0.0) {
                return Err(Error::Input(format!(
                    "{name} must be non-negative, got {y}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeutronModel {
    /// Removal (1/cm).
    pub sigma_t: Rate,
    /// Kerma coefficient (MeV·cm⁻¹ per unit fluence).
    pub kerma: Rate,
}

/// Spatial field on the (x, y) nodes, row-major in x.
pub type SpatialField = DoseField;

/// `I(x) = ∫ Σ_nuc(E) Φ(x, E) dE`, trapezoid rule in energy.
pub fn interaction_proxy(
    phi: &DirectionalField,
    sigma_nuc: &Rate,
    grid: &PhaseGrid,
) -> Result<SpatialField> {
    if phi.dims() != grid.dims() {
        return Err(Error::Shape(
            "scalar fluence does not match the grid".into(),
        ));
    }
    sigma_nuc.validate("Σ_nuc")?;
    let coef: Vec<f64> = trapezoid_weights(&grid.e)
        .iter()
        .zip(&grid.e)
        .map(|(w, e)| w * sigma_nuc.at(*e))
        .collect();
    let ne = grid.ne();
    let mut out = DoseField::zeros(grid);
    for (n, v) in out.values.iter_mut().enumerate() {
        *v = phi.values()[n * ne..(n + 1) * ne]
            .iter()
            .zip(&coef)
            .map(|(p, c)| p * c)
            .sum();
    }
    Ok(out)
}

/// Per-direction secondary emission densities.
pub struct SecondarySources {
    pub proton: AngularField,
    pub neutron: AngularField,
}

fn separable_source(
    proxy: &SpatialField,
    scale: f64,
    spectrum: &[f64],
    grid: &PhaseGrid,
    q: usize,
) -> Result<AngularField> {
    let ne = grid.ne();
    let mut values = Vec::with_capacity(grid.len());
    for p in &proxy.values {
        for w in spectrum.iter().take(ne) {
            values.push(scale * p * w);
        }
    }
    let one = DirectionalField::from_values(grid.dims(), values)?;
    AngularField::from_components(vec![one; q])
}

/// `Q_i = Y I(x) w(E) / Q` for both species, uniform over directions.
pub fn secondary_sources(
    proxy: &SpatialField,
    spec: &SecondarySourceSpec,
    dirs: &DirectionSet,
    proton_grid: &PhaseGrid,
    neutron_grid: &PhaseGrid,
) -> Result<SecondarySources> {
    spec.validate()?;
    for g in [proton_grid, neutron_grid] {
        if g.x != proxy.x || g.y != proxy.y {
            return Err(Error::Shape(
                "secondary grid does not share the proxy's spatial nodes".into(),
            ));
        }
    }
    let q = dirs.q();
    let wp = spec.w_p.on_nodes(&proton_grid.e)?;
    let wn = spec.w_n.on_nodes(&neutron_grid.e)?;
    Ok(SecondarySources {
        proton: separable_source(proxy, spec.yield_p / q as f64, &wp, proton_grid, q)?,
        neutron: separable_source(proxy, spec.yield_n / q as f64, &wn, neutron_grid, q)?,
    })
}

/// Everything configurable about the carbon run and its secondaries.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSpeciesSpec {
    /// Carbon phase space; energies in MeV/u.
    pub grid: GridConfig,
    pub table: RangeEnergyTable,
    /// Bragg–Kleeman fit window; the carbon energy interval when absent.
    pub fit_window: Option<Interval>,
    pub q: usize,
    pub theta_c: f64,
    pub kernel: ScatterKernelSpec,
    pub beam: BeamSpec,
    pub iteration: IterationConfig,
    pub sweep: SweepOptions,
    pub sources: SecondarySourceSpec,
    pub proton_stopping: BraggKleemanModel,
    pub proton_energy: (f64, f64, usize),
    pub neutron_energy: (f64, f64, usize),
    pub neutron: NeutronModel,
    pub secondary_q: usize,
    pub secondary_theta_c: f64,
    /// Depth-dose band half-width; one transverse spacing when absent.
    pub band_halfwidth: Option<f64>,
    pub out_dir: Option<PathBuf>,
}

impl Default for MultiSpeciesSpec {
    fn default() -> Self {
        MultiSpeciesSpec {
            grid: GridConfig {
                x_min: 0.0,
                x_max: 8.0,
                y_min: -2.0,
                y_max: 2.0,
                nx: 65,
                ny: 33,
                e_min: 5.0,
                e_max: 140.0,
                ne: 65,
            },
            table: RangeEnergyTable::bundled_carbon(),
            fit_window: None,
            q: 17,
            theta_c: PI / 2.0,
            kernel: ScatterKernelSpec::HenyeyGreenstein {
                sigma_el: 0.2,
                gamma: 0.97,
            },
            beam: BeamSpec {
                y0: 0.0,
                sigma_y: 0.3,
                energy: 130.0,
                sigma_e: 1.0,
                amplitude: 1.0,
            },
            iteration: IterationConfig::default(),
            sweep: SweepOptions::default(),
            sources: SecondarySourceSpec {
                sigma_nuc: Rate::Constant(0.02),
                yield_p: 1.0,
                yield_n: 1.0,
                w_p: Spectrum::TruncatedGaussian {
                    mean: 15.0,
                    std: 8.0,
                },
                w_n: Spectrum::Uniform,
            },
            proton_stopping: BraggKleemanModel::proton_water(),
            proton_energy: (1.0, 40.0, 17),
            neutron_energy: (1.0, 20.0, 5),
            neutron: NeutronModel {
                sigma_t: Rate::Constant(0.05),
                kerma: Rate::Constant(0.01),
            },
            secondary_q: 17,
            secondary_theta_c: PI,
            band_halfwidth: None,
            out_dir: None,
        }
    }
}

impl MultiSpeciesSpec {
    fn secondary_grid(&self, (lo, hi, n): (f64, f64, usize)) -> Result<PhaseGrid> {
        build_grid(&GridConfig {
            e_min: lo,
            e_max: hi,
            ne: n,
            ..self.grid
        })
    }

    pub fn fit_interval(&self) -> Interval {
        self.fit_window
            .unwrap_or_else(|| Interval::new(self.grid.e_min, self.grid.e_max))
    }
}

pub struct CarbonSolution {
    pub psi: AngularField,
    pub report: IterationReport,
    pub grid: PhaseGrid,
    pub dirs: DirectionSet,
    pub fitted: BraggKleemanModel,
    pub tabulated: TabulatedStoppingModel,
    pub dose: DoseField,
}

/// Source-iterated carbon solve: characteristics follow a Bragg–Kleeman fit
/// of the table while the dose uses the tabulated stopping power.
pub fn solve_carbon_primary(spec: &MultiSpeciesSpec) -> Result<CarbonSolution> {
    let window = spec.fit_interval();
    let fitted = fit_bragg_kleeman(&spec.table, window)?;
    let tabulated =
        fit_tabulated_stopping(&spec.table, Interval::new(spec.grid.e_min, spec.grid.e_max))?;
    let setup = Setup {
        grid: spec.grid,
        stopping: fitted,
        q: spec.q,
        theta_c: spec.theta_c,
        axis: 0.0,
        kernel: spec.kernel.clone(),
        sigma_t: None,
        beam: spec.beam,
        iteration: spec.iteration,
        sweep: spec.sweep,
    };
    let assembled = Assembled::new(&setup)?;
    let (psi, report) = source_iterate(&assembled.problem(), &spec.iteration)?;
    let dose = dose(
        &psi,
        |e| tabulated.stopping(e),
        &assembled.dirs.varpi,
        &assembled.grid,
    )?;
    Ok(CarbonSolution {
        psi,
        report,
        grid: assembled.grid,
        dirs: assembled.dirs,
        fitted,
        tabulated,
        dose,
    })
}

/// Slowing-down of secondary protons from their volumetric source: one sweep
/// per direction, zero inflow, no removal.
pub fn solve_secondary_proton(
    source: &AngularField,
    stopping: &StoppingModel,
    dirs: &DirectionSet,
    grid: &PhaseGrid,
    opts: &SweepOptions,
) -> Result<(AngularField, DoseField)> {
    if source.q() != dirs.q() {
        return Err(Error::Shape(
            "proton source does not match the direction set".into(),
        ));
    }
    stopping.check_admissible(&grid.e)?;
    let comps = (0..dirs.q())
        .into_par_iter()
        .map(|i| {
            sweep_direction(
                grid,
                stopping,
                &Removal::Constant(0.0),
                Direction {
                    index: i,
                    omega: dirs.omega[i],
                },
                &InflowData::Zero,
                VolumetricSource::Gridded(source.component(i)),
                opts,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let psi = AngularField::from_components(comps)?;
    let d = dose(&psi, |e| stopping.stopping(e), &dirs.varpi, grid)?;
    Ok((psi, d))
}

/// Straight-line neutron transport with removal and kerma dose.
pub fn solve_neutron(
    source: &AngularField,
    model: &NeutronModel,
    dirs: &DirectionSet,
    grid: &PhaseGrid,
    opts: &SweepOptions,
) -> Result<(AngularField, DoseField)> {
    if source.q() != dirs.q() {
        return Err(Error::Shape(
            "neutron source does not match the direction set".into(),
        ));
    }
    model.sigma_t.validate("σ_T^N")?;
    model.kerma.validate("κ_N")?;
    let removal: Vec<f64> = grid.e.iter().map(|e| model.sigma_t.at(*e)).collect();
    let comps = (0..dirs.q())
        .into_par_iter()
        .map(|i| sweep_streaming(grid, &removal, dirs.omega[i], source.component(i), opts))
        .collect::<Result<Vec<_>>>()?;
    let psi = AngularField::from_components(comps)?;
    let d = dose(&psi, |e| model.kerma.at(e), &dirs.varpi, grid)?;
    Ok((psi, d))
}

/// Depth-dose table of all components.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthDoseTable {
    pub carbon: DepthDoseCurve,
    pub proton: DepthDoseCurve,
    pub neutron: DepthDoseCurve,
    pub total: DepthDoseCurve,
}

impl DepthDoseTable {
    /// `x_cm,D_C,D_P,D_N,D_T`.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("x_cm,D_C,D_P,D_N,D_T\n");
        for k in 0..self.carbon.x.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                self.carbon.x[k],
                self.carbon.values[k],
                self.proton.values[k],
                self.neutron.values[k],
                self.total.values[k]
            );
        }
        s
    }
}

pub struct MultiSpeciesResult {
    pub carbon: CarbonSolution,
    pub proxy: SpatialField,
    pub proton_dose: DoseField,
    pub neutron_dose: DoseField,
    pub total_dose: DoseField,
    pub depth: DepthDoseTable,
    /// `R_BK(E_beam) - R_BK(E_min)` of the fitted carbon law.
    pub expected_peak_depth: f64,
    pub metadata: Metadata,
}

pub fn run_experiment_6(spec: &MultiSpeciesSpec) -> Result<MultiSpeciesResult> {
    spec.sources.validate()?;
    let carbon = solve_carbon_primary(spec)?;
    let phi = carbon.psi.weighted_sum(&carbon.dirs.varpi)?;
    let proxy = interaction_proxy(&phi, &spec.sources.sigma_nuc, &carbon.grid)?;

    let proton_grid = spec.secondary_grid(spec.proton_energy)?;
    let neutron_grid = spec.secondary_grid(spec.neutron_energy)?;
    let sec_dirs = build_direction_set(spec.secondary_q, spec.secondary_theta_c, 0.0)?;
    let sources = secondary_sources(
        &proxy,
        &spec.sources,
        &sec_dirs,
        &proton_grid,
        &neutron_grid,
    )?;
    let proton_stopping: StoppingModel = spec.proton_stopping.into();
    let (_, proton_dose) = solve_secondary_proton(
        &sources.proton,
        &proton_stopping,
        &sec_dirs,
        &proton_grid,
        &spec.sweep,
    )?;
    let (_, neutron_dose) = solve_neutron(
        &sources.neutron,
        &spec.neutron,
        &sec_dirs,
        &neutron_grid,
        &spec.sweep,
    )?;
    let total_dose = DoseField::sum(&[&carbon.dose, &proton_dose, &neutron_dose])?;

    let band = spec
        .band_halfwidth
        .unwrap_or((spec.grid.y_max - spec.grid.y_min) / (spec.grid.ny - 1) as f64);
    let depth = DepthDoseTable {
        carbon: depth_dose(&carbon.dose, band)?,
        proton: depth_dose(&proton_dose, band)?,
        neutron: depth_dose(&neutron_dose, band)?,
        total: depth_dose(&total_dose, band)?,
    };
    let expected_peak_depth = carbon.fitted.range_unchecked(spec.beam.energy)
        - carbon.fitted.range_unchecked(spec.grid.e_min);

    if let Some(dir) = &spec.out_dir {
        write_text(&dir.join("carbon_dose.csv"), &carbon.dose.to_csv_string())?;
        write_text(&dir.join("proton_dose.csv"), &proton_dose.to_csv_string())?;
        write_text(&dir.join("neutron_dose.csv"), &neutron_dose.to_csv_string())?;
        write_text(&dir.join("total_dose.csv"), &total_dose.to_csv_string())?;
        write_text(
            &dir.join("carbon_multispecies_depth_dose.csv"),
            &depth.to_csv_string(),
        )?;
        write_text(
            &dir.join("carbon_iter_history.csv"),
            &carbon.report.history_csv(),
        )?;
        let fitted: StoppingModel = carbon.fitted.into();
        write_text(
            &dir.join("carbon_bk_fit.csv"),
            &fitted.export_csv(&carbon.grid.e),
        )?;
    }

    let metadata = vec![
        ("exp6.bk_alpha".into(), carbon.fitted.alpha().to_string()),
        ("exp6.bk_p".into(), carbon.fitted.p().to_string()),
        (
            "exp6.fit_window".into(),
            format!("{} {}", spec.fit_interval().lo, spec.fit_interval().hi),
        ),
        ("exp6.table_source".into(), spec.table.source.clone()),
        (
            "exp6.table_projected".into(),
            carbon.tabulated.was_projected().to_string(),
        ),
        (
            "exp6.expected_peak_depth".into(),
            expected_peak_depth.to_string(),
        ),
        ("exp6.band_halfwidth".into(), band.to_string()),
        (
            "exp6.carbon_iterations".into(),
            carbon.report.iterations().to_string(),
        ),
        ("exp6.sources".into(), format!("{:?}", spec.sources)),
        ("exp6.neutron".into(), format!("{:?}", spec.neutron)),
    ];
    Ok(MultiSpeciesResult {
        carbon,
        proxy,
        proton_dose,
        neutron_dose,
        total_dose,
        depth,
        expected_peak_depth,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(e: (f64, f64, usize)) -> PhaseGrid {
        build_grid(&GridConfig {
            x_min: 0.0,
            x_max: 2.0,
            y_min: -1.0,
            y_max: 1.0,
            nx: 9,
            ny: 9,
            e_min: e.0,
            e_max: e.1,
            ne: e.2,
        })
        .unwrap()
    }

    #[test]
    fn rate_interpolation() {
        let r = Rate::Table {
            energy: vec![1.0, 3.0],
            value: vec![2.0, 4.0],
        };
        r.validate("r").unwrap();
        assert_eq!(r.at(0.0), 2.0);
        assert_eq!(r.at(2.0), 3.0);
        assert_eq!(r.at(9.0), 4.0);
        assert!(Rate::Constant(-1.0).validate("r").is_err());
        assert!(Rate::Table {
            energy: vec![1.0, 1.0],
            value: vec![0.0, 0.0]
        }
        .validate("r")
        .is_err());
    }

    #[test]
    fn spectra_are_normalised() {
        let nodes: Vec<f64> = (0..21).map(|i| 1.0 + i as f64).collect();
        let w = trapezoid_weights(&nodes);
        for s in [
            Spectrum::Uniform,
            Spectrum::TruncatedGaussian {
                mean: 8.0,
                std: 3.0,
            },
        ] {
            let v = s.on_nodes(&nodes).unwrap();
            let mass: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((mass - 1.0).abs() < 1e-12);
            assert!(v.iter().all(|x| *x >= 0.0));
        }
        let bad = Spectrum::Table {
            energy: vec![1.0, 21.0],
            value: vec![0.1, 0.1],
        };
        assert!(bad.on_nodes(&nodes).is_err());
        let good = Spectrum::Table {
            energy: vec![1.0, 21.0],
            value: vec![0.05, 0.05],
        };
        assert_eq!(good.on_nodes(&nodes).unwrap()[3], 0.05);
    }

    #[test]
    fn proxy_factorises_for_constant_rate() {
        let g = grid((1.0, 5.0, 5));
        let mut phi = DirectionalField::zeros(g.dims());
        for k in 0..9 {
            for l in 0..9 {
                for m in 0..5 {
                    phi.set(k, l, m, (k + l) as f64 * g.e[m]);
                }
            }
        }
        let c = 0.3;
        let p = interaction_proxy(&phi, &Rate::Constant(c), &g).unwrap();
        // ∫_1^5 E dE = 12, exact under the trapezoid rule
        for k in 0..9 {
            for l in 0..9 {
                assert_relative_eq!(
                    p.get(k, l),
                    c * 12.0 * (k + l) as f64,
                    max_relative = 1e-13,
                    epsilon = 1e-14
                );
            }
        }
        let zero =
            interaction_proxy(&DirectionalField::zeros(g.dims()), &Rate::Constant(c), &g).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
    }

    fn spec_sources(yp: f64, yn: f64) -> SecondarySourceSpec {
        SecondarySourceSpec {
            sigma_nuc: Rate::Constant(0.1),
            yield_p: yp,
            yield_n: yn,
            w_p: Spectrum::TruncatedGaussian {
                mean: 10.0,
                std: 4.0,
            },
            w_n: Spectrum::Uniform,
        }
    }

    #[test]
    fn source_emission_totals() {
        let gp = grid((1.0, 20.0, 9));
        let gn = grid((1.0, 10.0, 4));
        let dirs = build_direction_set(5, PI, 0.0).unwrap();
        let mut proxy = DoseField::zeros(&gp);
        proxy
            .values
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = (i % 7) as f64);
        let s = secondary_sources(&proxy, &spec_sources(2.0, 1.0), &dirs, &gp, &gn).unwrap();
        let wx = trapezoid_weights(&gp.x);
        let wy = trapezoid_weights(&gp.y);
        let we = trapezoid_weights(&gp.e);
        let mut emitted = 0.0;
        let mut proxy_mass = 0.0;
        for k in 0..9 {
            for l in 0..9 {
                proxy_mass += wx[k] * wy[l] * proxy.get(k, l);
                for m in 0..9 {
                    for i in 0..5 {
                        emitted += wx[k] * wy[l] * we[m] * s.proton.component(i).get(k, l, m);
                    }
                }
            }
        }
        assert_relative_eq!(emitted, 2.0 * proxy_mass, max_relative = 1e-12);

        let none = secondary_sources(&proxy, &spec_sources(0.0, 1.0), &dirs, &gp, &gn).unwrap();
        assert!(none
            .proton
            .components()
            .iter()
            .all(|c| c.values().iter().all(|v| *v == 0.0)));
        let double = secondary_sources(&proxy, &spec_sources(2.0, 2.0), &dirs, &gp, &gn).unwrap();
        for (a, b) in double.neutron.components()[2]
            .values()
            .iter()
            .zip(s.neutron.components()[2].values())
        {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn neutron_constant_source_closed_form() {
        let g = grid((1.0, 2.0, 2));
        let dirs = build_direction_set(1, 0.01, 0.0).unwrap();
        let c = 0.7;
        let sigma = 0.8;
        let src = AngularField::from_components(vec![DirectionalField::from_values(
            g.dims(),
            vec![c; g.len()],
        )
        .unwrap()])
        .unwrap();
        let model = NeutronModel {
            sigma_t: Rate::Constant(sigma),
            kerma: Rate::Constant(1.0),
        };
        let (psi, d) = solve_neutron(&src, &model, &dirs, &g, &SweepOptions::default()).unwrap();
        for k in 0..9 {
            let tau = g.x[k];
            let exact = c * (1.0 - (-sigma * tau).exp()) / sigma;
            assert_relative_eq!(
                psi.component(0).get(k, 4, 1),
                exact,
                max_relative = 1e-3,
                epsilon = 1e-15
            );
        }
        assert!(d.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn proton_zero_source_gives_zero_dose() {
        let g = grid((1.0, 20.0, 5));
        let dirs = build_direction_set(3, PI, 0.0).unwrap();
        let stopping: StoppingModel = BraggKleemanModel::proton_water().into();
        let (_, d) = solve_secondary_proton(
            &AngularField::zeros(g.dims(), 3),
            &stopping,
            &dirs,
            &g,
            &SweepOptions::default(),
        )
        .unwrap();
        assert!(d.values.iter().all(|v| *v == 0.0));
    }
}
