//! Run configuration: a TOML file read as flat dotted keys, with unknown-key
//! rejection and key paths in every error.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use toml::Value;

use crate::angular::{build_direction_set, ScatterKernelSpec};
use crate::benchmark::{Setup, StudySpec};
use crate::error::{Error, Result};
use crate::grid::{build_grid, GridConfig};
use crate::iteration::{Diagnostic, IterationConfig, TolMode};
use crate::multispecies::{MultiSpeciesSpec, Rate, Spectrum};
use crate::physics::{fit_bragg_kleeman, load_range_table, BraggKleemanModel, Interval};
use crate::sweep::SweepOptions;

/// Which study a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Bench,
    Iterate,
    Hg,
    Angular,
    Coupling,
    Carbon,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Bench,
        Experiment::Iterate,
        Experiment::Hg,
        Experiment::Angular,
        Experiment::Coupling,
        Experiment::Carbon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Bench => "bench",
            Experiment::Iterate => "iterate",
            Experiment::Hg => "hg",
            Experiment::Angular => "angular",
            Experiment::Coupling => "coupling",
            Experiment::Carbon => "carbon",
        }
    }

    pub fn number(self) -> u8 {
        Experiment::ALL.iter().position(|e| *e == self).unwrap() as u8 + 1
    }

    pub fn parse(s: &str) -> Option<Experiment> {
        Experiment::ALL.iter().copied().find(|e| e.name() == s)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSpec {
    Study(Box<StudySpec>),
    Carbon(Box<MultiSpeciesSpec>),
}

/// A validated configuration with every default materialised.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub spec: ExperimentSpec,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub seed: u64,
    /// Path of a range table the physics block was fitted to, if any.
    pub physics_table: Option<PathBuf>,
}

/// Flattened view of a TOML document that remembers which keys were read.
struct Keys {
    map: BTreeMap<String, Value>,
    used: std::collections::BTreeSet<String>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::config(
            key,
            format!("expected a number, found {}", type_name(other)),
        )),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        Value::Integer(i) => Err(Error::config(
            key,
            format!("must be a non-negative integer, got {i}"),
        )),
        other => Err(Error::config(
            key,
            format!("expected an integer, found {}", type_name(other)),
        )),
    }
}

impl Keys {
    fn parse(text: &str, source: &Path) -> Result<Keys> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::config("<file>", format!("{}: {}", source.display(), e.message()))
        })?;
        let mut map = BTreeMap::new();
        flatten("", &table, &mut map);
        Ok(Keys {
            map,
            used: Default::default(),
        })
    }

    fn raw(&mut self, key: &str) -> Option<&Value> {
        let v = self.map.get(key)?;
        self.used.insert(key.to_owned());
        Some(v)
    }

    fn f64(&mut self, key: &str, slot: &mut f64) -> Result<()> {
        if let Some(v) = self.raw(key) {
            *slot = as_f64(key, v)?;
        }
        Ok(())
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.raw(key).map(|v| as_f64(key, v)).transpose()
    }

    fn usize(&mut self, key: &str, slot: &mut usize) -> Result<()> {
        if let Some(v) = self.raw(key) {
            *slot = as_usize(key, v)?;
        }
        Ok(())
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(Error::config(
                key,
                format!("expected a string, found {}", type_name(other)),
            )),
        }
    }

    fn bool(&mut self, key: &str, slot: &mut bool) -> Result<()> {
        match self.raw(key) {
            None => Ok(()),
            Some(Value::Boolean(b)) => {
                *slot = *b;
                Ok(())
            }
            Some(other) => Err(Error::config(
                key,
                format!("expected a boolean, found {}", type_name(other)),
            )),
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(a)) => {
                let a = a.clone();
                a.iter()
                    .enumerate()
                    .map(|(i, v)| as_f64(&format!("{key}[{i}]"), v))
                    .collect::<Result<Vec<_>>>()
                    .map(Some)
            }
            Some(other) => Err(Error::config(
                key,
                format!("expected an array, found {}", type_name(other)),
            )),
        }
    }

    fn usize_list(&mut self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(a)) => {
                let a = a.clone();
                a.iter()
                    .enumerate()
                    .map(|(i, v)| as_usize(&format!("{key}[{i}]"), v))
                    .collect::<Result<Vec<_>>>()
                    .map(Some)
            }
            Some(other) => Err(Error::config(
                key,
                format!("expected an array, found {}", type_name(other)),
            )),
        }
    }

    fn pairs(&mut self, key: &str) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Array(a)) => {
                let a = a.clone();
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for (i, row) in a.iter().enumerate() {
                    let k = format!("{key}[{i}]");
                    match row {
                        Value::Array(p) if p.len() == 2 => {
                            xs.push(as_f64(&k, &p[0])?);
                            ys.push(as_f64(&k, &p[1])?);
                        }
                        _ => return Err(Error::config(k, "expected an [energy, value] pair")),
                    }
                }
                Ok(Some((xs, ys)))
            }
            Some(other) => Err(Error::config(
                key,
                format!("expected an array, found {}", type_name(other)),
            )),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(k) = self.map.keys().find(|k| !self.used.contains(*k)) {
            return Err(Error::config(k.clone(), "unknown key"));
        }
        Ok(())
    }
}

fn grid_block(keys: &mut Keys, g: &mut GridConfig) -> Result<()> {
    keys.f64("grid.x_min", &mut g.x_min)?;
    keys.f64("grid.x_max", &mut g.x_max)?;
    keys.f64("grid.y_min", &mut g.y_min)?;
    keys.f64("grid.y_max", &mut g.y_max)?;
    keys.usize("grid.nx", &mut g.nx)?;
    keys.usize("grid.ny", &mut g.ny)?;
    keys.usize("grid.ne", &mut g.ne)?;
    keys.f64("grid.e_min", &mut g.e_min)?;
    keys.f64("grid.e_max", &mut g.e_max)?;
    build_grid(g).map_err(|e| Error::config("grid", e.to_string()))?;
    Ok(())
}

fn kernel_block(keys: &mut Keys, prefix: &str, kernel: &mut ScatterKernelSpec) -> Result<()> {
    let kind_key = format!("{prefix}.kernel");
    let kind = keys.string(&kind_key)?;
    let sigma = keys
        .opt_f64(&format!("{prefix}.sigma_el"))?
        .unwrap_or(kernel.sigma_el());
    let gamma_key = format!("{prefix}.gamma");
    let gamma = keys.opt_f64(&gamma_key)?;
    let current_gamma = match kernel {
        ScatterKernelSpec::HenyeyGreenstein { gamma, .. } => *gamma,
        _ => 0.9,
    };
    let kind = kind.unwrap_or_else(|| match kernel {
        ScatterKernelSpec::Dirac { .. } => "dirac".into(),
        ScatterKernelSpec::HenyeyGreenstein { .. } => "hg".into(),
        ScatterKernelSpec::Isotropic { .. } => "isotropic".into(),
    });
    *kernel = match kind.as_str() {
        "dirac" => ScatterKernelSpec::Dirac { sigma_el: sigma },
        "hg" => ScatterKernelSpec::HenyeyGreenstein {
            sigma_el: sigma,
            gamma: gamma.unwrap_or(current_gamma),
        },
        "isotropic" => ScatterKernelSpec::Isotropic { sigma_el: sigma },
        other => {
            return Err(Error::config(
                kind_key,
                format!("unknown kernel `{other}` (expected dirac, hg or isotropic)"),
            ))
        }
    };
    if gamma.is_some() && !matches!(kernel, ScatterKernelSpec::HenyeyGreenstein { .. }) {
        return Err(Error::config(
            gamma_key,
            "only the hg kernel takes an anisotropy",
        ));
    }
    kernel
        .validate()
        .map_err(|e| Error::config(format!("{prefix}.sigma_el"), e.to_string()))
}

fn angular_block(keys: &mut Keys, prefix: &str, q: &mut usize, theta_c: &mut f64) -> Result<()> {
    let q_key = format!("{prefix}.Q");
    keys.usize(&q_key, q)?;
    keys.f64(&format!("{prefix}.theta_c"), theta_c)?;
    if *q == 0 || *q % 2 == 0 {
        return Err(Error::config(
            q_key,
            format!("must be a positive odd integer, got {q}"),
        ));
    }
    build_direction_set(*q, *theta_c, 0.0)
        .map_err(|e| Error::config(format!("{prefix}.theta_c"), e.to_string()))?;
    Ok(())
}

fn iteration_block(keys: &mut Keys, it: &mut IterationConfig) -> Result<()> {
    keys.f64("iteration.tol", &mut it.tol)?;
    keys.usize("iteration.max_iter", &mut it.max_iter)?;
    if let Some(d) = keys.string("iteration.diagnostic")? {
        it.diagnostic = match d.as_str() {
            "delta_inf" => Diagnostic::DeltaInf,
            "weighted_l2" => Diagnostic::WeightedL2,
            other => {
                return Err(Error::config(
                    "iteration.diagnostic",
                    format!("unknown diagnostic `{other}` (expected delta_inf or weighted_l2)"),
                ))
            }
        };
    }
    if let Some(m) = keys.string("iteration.tol_mode")? {
        it.tol_mode = match m.as_str() {
            "relative" => TolMode::Relative,
            "absolute" => TolMode::Absolute,
            other => {
                return Err(Error::config(
                    "iteration.tol_mode",
                    format!("unknown mode `{other}` (expected relative or absolute)"),
                ))
            }
        };
    }
    if let Some(r) = keys.opt_f64("iteration.rho")? {
        it.rho = Some(r);
    }
    keys.bool("iteration.aposteriori", &mut it.aposteriori)?;
    it.validate()
        .map_err(|e| Error::config("iteration", e.to_string()))
}

fn sweep_block(keys: &mut Keys, s: &mut SweepOptions) -> Result<()> {
    keys.f64("moc.source_step_factor", &mut s.source_step_factor)?;
    s.validate()
        .map_err(|e| Error::config("moc.source_step_factor", e.to_string()))
}

fn beam_block(keys: &mut Keys, b: &mut crate::benchmark::BeamSpec) -> Result<()> {
    keys.f64("beam.y0", &mut b.y0)?;
    keys.f64("beam.sigma_y", &mut b.sigma_y)?;
    keys.f64("beam.energy", &mut b.energy)?;
    keys.f64("beam.sigma_e", &mut b.sigma_e)?;
    keys.f64("beam.amplitude", &mut b.amplitude)?;
    b.validate()
        .map_err(|e| Error::config("beam", e.to_string()))
}

fn window(keys: &mut Keys, key: &str) -> Result<Option<Interval>> {
    match keys.f64_list(key)? {
        None => Ok(None),
        Some(v) if v.len() == 2 && v[0] > 0.0 && v[0] < v[1] => Ok(Some(Interval::new(v[0], v[1]))),
        Some(_) => Err(Error::config(key, "expected [lo, hi] with 0 < lo < hi")),
    }
}

/// Physics block of the single-species studies.
fn physics_block(keys: &mut Keys, setup: &mut Setup, base: &Path) -> Result<Option<PathBuf>> {
    let model = keys
        .string("physics.stopping")?
        .unwrap_or_else(|| "bragg_kleeman".into());
    let alpha = keys.opt_f64("physics.alpha")?;
    let p = keys.opt_f64("physics.p")?;
    let table = keys.string("physics.table")?;
    let fit = window(keys, "physics.fit_window")?;
    let mut table_path = None;
    match model.as_str() {
        "bragg_kleeman" => {
            if table.is_some() || fit.is_some() {
                return Err(Error::config(
                    "physics.table",
                    "only used with physics.stopping = \"table_fit\"",
                ));
            }
            let a = alpha.unwrap_or(setup.stopping.alpha());
            let pp = p.unwrap_or(setup.stopping.p());
            setup.stopping = BraggKleemanModel::new(a, pp)
                .map_err(|e| Error::config("physics.alpha", e.to_string()))?;
        }
        "table_fit" => {
            if alpha.is_some() || p.is_some() {
                return Err(Error::config(
                    "physics.alpha",
                    "not used with a fitted table",
                ));
            }
            let path = resolve(
                base,
                table.ok_or_else(|| Error::config("physics.table", "required for table_fit"))?,
            );
            let t = load_range_table(&path)?;
            let w = fit.unwrap_or(Interval::new(setup.grid.e_min, setup.grid.e_max));
            setup.stopping = fit_bragg_kleeman(&t, w)
                .map_err(|e| Error::config("physics.fit_window", e.to_string()))?;
            table_path = Some(path);
        }
        other => {
            return Err(Error::config(
                "physics.stopping",
                format!("unknown model `{other}` (expected bragg_kleeman or table_fit)"),
            ))
        }
    }
    kernel_block(keys, "physics", &mut setup.kernel)?;
    if let Some(s) = keys.opt_f64("physics.sigma_t")? {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::config(
                "physics.sigma_t",
                format!("must be non-negative, got {s}"),
            ));
        }
        setup.sigma_t = Some(s);
    }
    Ok(table_path)
}

fn gamma_list(keys: &mut Keys, key: &str, slot: &mut Vec<f64>) -> Result<()> {
    if let Some(g) = keys.f64_list(key)? {
        if g.is_empty() {
            return Err(Error::config(key, "must not be empty"));
        }
        if let Some(bad) = g.iter().find(|v| !(**v >= 0.0 && **v < 1.0)) {
            return Err(Error::config(
                key,
                format!("γ must lie in [0, 1), got {bad}"),
            ));
        }
        *slot = g;
    }
    Ok(())
}

fn study_config(
    keys: &mut Keys,
    experiment: Experiment,
    base: &Path,
) -> Result<(StudySpec, Option<PathBuf>)> {
    let mut spec = StudySpec::for_experiment(experiment.number())?;
    let s = &mut spec.setup;
    grid_block(keys, &mut s.grid)?;
    let table = physics_block(keys, s, base)?;
    angular_block(keys, "angular", &mut s.q, &mut s.theta_c)?;
    iteration_block(keys, &mut s.iteration)?;
    sweep_block(keys, &mut s.sweep)?;
    beam_block(keys, &mut s.beam)?;

    spec.x_dagger = keys.opt_f64("observables.x_dagger")?;
    if let Some(levels) = keys.raw("bench.levels").cloned() {
        let Value::Array(rows) = levels else {
            return Err(Error::config(
                "bench.levels",
                "expected an array of [Nx, Ny, NE] triples",
            ));
        };
        let mut out = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            let k = format!("bench.levels[{i}]");
            match row {
                Value::Array(t) if t.len() == 3 => {
                    let v = [
                        as_usize(&k, &t[0])?,
                        as_usize(&k, &t[1])?,
                        as_usize(&k, &t[2])?,
                    ];
                    if v.iter().any(|n| *n < 2) {
                        return Err(Error::config(k, "every count must be at least 2"));
                    }
                    out.push(v);
                }
                _ => return Err(Error::config(k, "expected an [Nx, Ny, NE] triple")),
            }
        }
        if out.is_empty() {
            return Err(Error::config("bench.levels", "must not be empty"));
        }
        spec.levels = out;
    }
    for (key, owner) in [
        ("hg.gammas", Experiment::Hg),
        ("coupling.gammas", Experiment::Coupling),
    ] {
        if experiment == owner {
            gamma_list(keys, key, &mut spec.gammas)?;
        } else if keys.raw(key).is_some() {
            return Err(Error::config(
                key,
                format!("only used by the {owner} experiment"),
            ));
        }
    }
    if let Some(q) = keys.usize_list("angular_study.Q_list")? {
        if let Some(bad) = q.iter().find(|q| **q == 0 || **q % 2 == 0) {
            return Err(Error::config(
                "angular_study.Q_list",
                format!("every Q must be odd and positive, got {bad}"),
            ));
        }
        spec.q_list = q;
    }
    if let Some(t) = keys.f64_list("angular_study.theta_list")? {
        spec.theta_list = t;
    }
    for (key, slot) in [
        ("angular_study.Q_ref", &mut spec.q_ref),
        ("angular_study.Q_ref_cone", &mut spec.q_ref_cone),
        ("angular_study.Q_star", &mut spec.q_star),
    ] {
        keys.usize(key, slot)?;
        if *slot == 0 || *slot % 2 == 0 {
            return Err(Error::config(
                key,
                format!("must be a positive odd integer, got {slot}"),
            ));
        }
    }
    keys.f64("angular_study.theta_max", &mut spec.theta_max)?;
    if let Some(bad) = spec
        .theta_list
        .iter()
        .chain([&spec.theta_max])
        .find(|t| !(**t > 0.0 && **t <= std::f64::consts::PI))
    {
        return Err(Error::config(
            "angular_study.theta_list",
            format!("cone angles must lie in (0, π], got {bad}"),
        ));
    }
    if let Some(c) = keys.string("angular_study.cache_dir")? {
        spec.cache_dir = Some(resolve(base, c));
    }
    Ok((spec, table))
}

fn spectrum(keys: &mut Keys, prefix: &str, current: &Spectrum) -> Result<Spectrum> {
    let kind_key = prefix.to_owned();
    let kind = keys.string(&kind_key)?;
    let mean = keys.opt_f64(&format!("{prefix}_mean"))?;
    let std = keys.opt_f64(&format!("{prefix}_std"))?;
    let table = keys.pairs(&format!("{prefix}_table"))?;
    let (m0, s0) = match current {
        Spectrum::TruncatedGaussian { mean, std } => (*mean, *std),
        _ => (15.0, 8.0),
    };
    let kind = kind.unwrap_or_else(|| match current {
        Spectrum::TruncatedGaussian { .. } => "gaussian".into(),
        Spectrum::Uniform => "uniform".into(),
        Spectrum::Table { .. } => "table".into(),
    });
    match kind.as_str() {
        "gaussian" => {
            let std = std.unwrap_or(s0);
            if !(std > 0.0) {
                return Err(Error::config(format!("{prefix}_std"), "must be positive"));
            }
            Ok(Spectrum::TruncatedGaussian {
                mean: mean.unwrap_or(m0),
                std,
            })
        }
        "uniform" => Ok(Spectrum::Uniform),
        "table" => {
            let (energy, value) = match (table, current) {
                (Some(t), _) => t,
                (None, Spectrum::Table { energy, value }) => (energy.clone(), value.clone()),
                (None, _) => {
                    return Err(Error::config(
                        format!("{prefix}_table"),
                        "required for a tabulated spectrum",
                    ))
                }
            };
            Ok(Spectrum::Table { energy, value })
        }
        other => Err(Error::config(
            kind_key,
            format!("unknown spectrum `{other}` (expected gaussian, uniform or table)"),
        )),
    }
}

fn rate(keys: &mut Keys, key: &str, current: &Rate) -> Result<Rate> {
    let r = match keys.raw(key).cloned() {
        None => current.clone(),
        Some(v @ (Value::Float(_) | Value::Integer(_))) => Rate::Constant(as_f64(key, &v)?),
        Some(Value::Array(_)) => {
            let (energy, value) = keys.pairs(key)?.expect("present");
            Rate::Table { energy, value }
        }
        Some(other) => {
            return Err(Error::config(
                key,
                format!(
                    "expected a number or [energy, value] pairs, found {}",
                    type_name(&other)
                ),
            ))
        }
    };
    r.validate(key)
        .map_err(|e| Error::config(key, e.to_string()))?;
    Ok(r)
}

fn energy_triple(keys: &mut Keys, key: &str, slot: &mut (f64, f64, usize)) -> Result<()> {
    if let Some(v) = keys.f64_list(key)? {
        if v.len() != 3 || !(v[0] > 0.0 && v[0] < v[1]) || v[2] < 2.0 || v[2].fract() != 0.0 {
            return Err(Error::config(
                key,
                "expected [E_min, E_max, count] with 0 < E_min < E_max and count >= 2",
            ));
        }
        *slot = (v[0], v[1], v[2] as usize);
    }
    Ok(())
}

fn carbon_config(keys: &mut Keys, base: &Path) -> Result<(MultiSpeciesSpec, Option<PathBuf>)> {
    let mut spec = MultiSpeciesSpec::default();
    grid_block(keys, &mut spec.grid)?;
    let mut table_path = None;
    if let Some(t) = keys.string("carbon.table")? {
        let path = resolve(base, t);
        spec.table = load_range_table(&path)?;
        table_path = Some(path);
    }
    spec.fit_window = window(keys, "carbon.fit_window")?;
    if spec.fit_interval().lo < spec.table.energy[0]
        || spec.fit_interval().hi > *spec.table.energy.last().unwrap()
    {
        return Err(Error::config(
            "carbon.fit_window",
            "fit window lies outside the range table",
        ));
    }
    kernel_block(keys, "physics", &mut spec.kernel)?;
    angular_block(keys, "angular", &mut spec.q, &mut spec.theta_c)?;
    iteration_block(keys, &mut spec.iteration)?;
    sweep_block(keys, &mut spec.sweep)?;
    beam_block(keys, &mut spec.beam)?;

    spec.sources.sigma_nuc = rate(keys, "carbon.sigma_nuc", &spec.sources.sigma_nuc)?;
    for (key, slot) in [
        ("carbon.yield_p", &mut spec.sources.yield_p),
        ("carbon.yield_n", &mut spec.sources.yield_n),
    ] {
        keys.f64(key, slot)?;
        if !(*slot >= 0.0 && slot.is_finite()) {
            return Err(Error::config(
                key,
                format!("must be non-negative, got {slot}"),
            ));
        }
    }
    spec.sources.w_p = spectrum(keys, "carbon.w_p", &spec.sources.w_p)?;
    spec.sources.w_n = spectrum(keys, "carbon.w_n", &spec.sources.w_n)?;
    energy_triple(keys, "carbon.proton_energy", &mut spec.proton_energy)?;
    energy_triple(keys, "carbon.neutron_energy", &mut spec.neutron_energy)?;
    spec.neutron.sigma_t = rate(keys, "carbon.sigma_t_n", &spec.neutron.sigma_t)?;
    spec.neutron.kerma = rate(keys, "carbon.kerma_n", &spec.neutron.kerma)?;
    if let Some(a) = keys.opt_f64("carbon.proton_alpha")? {
        let p = spec.proton_stopping.p();
        spec.proton_stopping = BraggKleemanModel::new(a, p)
            .map_err(|e| Error::config("carbon.proton_alpha", e.to_string()))?;
    }
    if let Some(p) = keys.opt_f64("carbon.proton_p")? {
        let a = spec.proton_stopping.alpha();
        spec.proton_stopping = BraggKleemanModel::new(a, p)
            .map_err(|e| Error::config("carbon.proton_p", e.to_string()))?;
    }
    angular_block(
        keys,
        "carbon.secondary",
        &mut spec.secondary_q,
        &mut spec.secondary_theta_c,
    )?;
    spec.band_halfwidth = keys.opt_f64("observables.band_halfwidth")?;
    if let Some(b) = spec.band_halfwidth {
        if !(b >= 0.0) {
            return Err(Error::config(
                "observables.band_halfwidth",
                "must be non-negative",
            ));
        }
    }
    for (key, (lo, hi, _)) in [
        ("carbon.proton_energy", spec.proton_energy),
        ("carbon.neutron_energy", spec.neutron_energy),
    ] {
        if lo <= 0.0 || hi <= lo {
            return Err(Error::config(key, "invalid energy interval"));
        }
    }
    // spectra must normalise on their grids
    let nodes = |(lo, hi, n): (f64, f64, usize)| -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    };
    spec.sources
        .w_p
        .on_nodes(&nodes(spec.proton_energy))
        .map_err(|e| Error::config("carbon.w_p", e.to_string()))?;
    spec.sources
        .w_n
        .on_nodes(&nodes(spec.neutron_energy))
        .map_err(|e| Error::config("carbon.w_n", e.to_string()))?;
    Ok((spec, table_path))
}

fn resolve(base: &Path, rel: impl AsRef<Path>) -> PathBuf {
    base.join(rel).components().collect()
}

/// Parse configuration text. Relative paths inside it resolve against `base`.
pub fn parse_config_str(text: &str, source: &Path, base: &Path) -> Result<RunConfig> {
    let mut keys = Keys::parse(text, source)?;
    let name = keys
        .string("experiment")?
        .ok_or_else(|| Error::config("experiment", "missing required key"))?;
    let experiment = Experiment::parse(&name).ok_or_else(|| {
        Error::config(
            "experiment",
            format!("unknown experiment `{name}` (expected bench, iterate, hg, angular, coupling or carbon)"),
        )
    })?;
    let (spec, physics_table) = match experiment {
        Experiment::Carbon => {
            let (s, t) = carbon_config(&mut keys, base)?;
            (ExperimentSpec::Carbon(Box::new(s)), t)
        }
        _ => {
            let (s, t) = study_config(&mut keys, experiment, base)?;
            (ExperimentSpec::Study(Box::new(s)), t)
        }
    };
    let out_dir = keys
        .string("output.dir")?
        .map(|d| resolve(base, d))
        .unwrap_or_else(|| resolve(base, format!("out_{}", experiment.name())));
    let mut threads = None;
    if let Some(v) = keys.raw("run.threads").cloned() {
        let n = as_usize("run.threads", &v)?;
        if n == 0 {
            return Err(Error::config("run.threads", "must be at least 1"));
        }
        threads = Some(n);
    }
    let mut seed = 0usize;
    keys.usize("run.seed", &mut seed)?;
    keys.finish()?;
    Ok(RunConfig {
        experiment,
        spec,
        out_dir,
        threads,
        seed: seed as u64,
        physics_table,
    })
}

/// Read and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, path, base)
}

fn kernel_lines(prefix: &str, k: &ScatterKernelSpec, out: &mut Vec<(String, String)>) {
    let (kind, gamma) = match k {
        ScatterKernelSpec::Dirac { .. } => ("dirac", None),
        ScatterKernelSpec::HenyeyGreenstein { gamma, .. } => ("hg", Some(*gamma)),
        ScatterKernelSpec::Isotropic { .. } => ("isotropic", None),
    };
    out.push((format!("{prefix}.kernel"), format!("\"{kind}\"")));
    out.push((format!("{prefix}.sigma_el"), k.sigma_el().to_string()));
    if let Some(g) = gamma {
        out.push((format!("{prefix}.gamma"), g.to_string()));
    }
}

fn list<T: ToString>(v: &[T]) -> String {
    format!(
        "[{}]",
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    )
}

fn rate_text(r: &Rate) -> String {
    match r {
        Rate::Constant(c) => c.to_string(),
        Rate::Table { energy, value } => format!(
            "[{}]",
            energy
                .iter()
                .zip(value)
                .map(|(e, v)| format!("[{e}, {v}]"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    }
}

impl RunConfig {
    /// Every effective setting as `key = value` lines in config syntax.
    pub fn materialized(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> =
            vec![("experiment".into(), format!("\"{}\"", self.experiment))];
        let push_grid = |g: &GridConfig, out: &mut Vec<(String, String)>| {
            for (k, v) in [
                ("x_min", g.x_min),
                ("x_max", g.x_max),
                ("y_min", g.y_min),
                ("y_max", g.y_max),
                ("e_min", g.e_min),
                ("e_max", g.e_max),
            ] {
                out.push((format!("grid.{k}"), v.to_string()));
            }
            for (k, v) in [("nx", g.nx), ("ny", g.ny), ("ne", g.ne)] {
                out.push((format!("grid.{k}"), v.to_string()));
            }
        };
        let push_common = |it: &IterationConfig,
                           sw: &SweepOptions,
                           b: &crate::benchmark::BeamSpec,
                           out: &mut Vec<(String, String)>| {
            out.push(("iteration.tol".into(), it.tol.to_string()));
            out.push(("iteration.max_iter".into(), it.max_iter.to_string()));
            out.push((
                "iteration.diagnostic".into(),
                match it.diagnostic {
                    Diagnostic::DeltaInf => "\"delta_inf\"".into(),
                    Diagnostic::WeightedL2 => "\"weighted_l2\"".into(),
                },
            ));
            out.push((
                "iteration.tol_mode".into(),
                match it.tol_mode {
                    TolMode::Relative => "\"relative\"".into(),
                    TolMode::Absolute => "\"absolute\"".into(),
                },
            ));
            if let Some(r) = it.rho {
                out.push(("iteration.rho".into(), r.to_string()));
            }
            out.push(("iteration.aposteriori".into(), it.aposteriori.to_string()));
            out.push((
                "moc.source_step_factor".into(),
                sw.source_step_factor.to_string(),
            ));
            for (k, v) in [
                ("y0", b.y0),
                ("sigma_y", b.sigma_y),
                ("energy", b.energy),
                ("sigma_e", b.sigma_e),
                ("amplitude", b.amplitude),
            ] {
                out.push((format!("beam.{k}"), v.to_string()));
            }
        };
        match &self.spec {
            ExperimentSpec::Study(spec) => {
                let s = &spec.setup;
                push_grid(&s.grid, &mut out);
                out.push(("physics.stopping".into(), "\"bragg_kleeman\"".into()));
                out.push(("physics.alpha".into(), s.stopping.alpha().to_string()));
                out.push(("physics.p".into(), s.stopping.p().to_string()));
                kernel_lines("physics", &s.kernel, &mut out);
                if let Some(t) = s.sigma_t {
                    out.push(("physics.sigma_t".into(), t.to_string()));
                }
                out.push(("angular.Q".into(), s.q.to_string()));
                out.push(("angular.theta_c".into(), s.theta_c.to_string()));
                push_common(&s.iteration, &s.sweep, &s.beam, &mut out);
                out.push(("observables.x_dagger".into(), spec.x_dagger().to_string()));
                match self.experiment {
                    Experiment::Bench => out.push((
                        "bench.levels".into(),
                        format!(
                            "[{}]",
                            spec.levels
                                .iter()
                                .map(|l| list(l))
                                .collect::<Vec<_>>()
                                .join(", ")
                        ),
                    )),
                    Experiment::Hg => out.push(("hg.gammas".into(), list(&spec.gammas))),
                    Experiment::Coupling => {
                        out.push(("coupling.gammas".into(), list(&spec.gammas)))
                    }
                    Experiment::Angular => {
                        out.push(("angular_study.Q_list".into(), list(&spec.q_list)));
                        out.push(("angular_study.theta_list".into(), list(&spec.theta_list)));
                        out.push(("angular_study.Q_ref".into(), spec.q_ref.to_string()));
                        out.push((
                            "angular_study.Q_ref_cone".into(),
                            spec.q_ref_cone.to_string(),
                        ));
                        out.push(("angular_study.Q_star".into(), spec.q_star.to_string()));
                        out.push(("angular_study.theta_max".into(), spec.theta_max.to_string()));
                        if let Some(c) = &spec.cache_dir {
                            out.push((
                                "angular_study.cache_dir".into(),
                                format!("{:?}", c.display().to_string()),
                            ));
                        }
                    }
                    _ => {}
                }
            }
            ExperimentSpec::Carbon(spec) => {
                push_grid(&spec.grid, &mut out);
                let w = spec.fit_interval();
                out.push(("carbon.fit_window".into(), list(&[w.lo, w.hi])));
                kernel_lines("physics", &spec.kernel, &mut out);
                out.push(("angular.Q".into(), spec.q.to_string()));
                out.push(("angular.theta_c".into(), spec.theta_c.to_string()));
                push_common(&spec.iteration, &spec.sweep, &spec.beam, &mut out);
                let src = &spec.sources;
                out.push(("carbon.sigma_nuc".into(), rate_text(&src.sigma_nuc)));
                out.push(("carbon.yield_p".into(), src.yield_p.to_string()));
                out.push(("carbon.yield_n".into(), src.yield_n.to_string()));
                for (name, s) in [("w_p", &src.w_p), ("w_n", &src.w_n)] {
                    match s {
                        Spectrum::TruncatedGaussian { mean, std } => {
                            out.push((format!("carbon.{name}"), "\"gaussian\"".into()));
                            out.push((format!("carbon.{name}_mean"), mean.to_string()));
                            out.push((format!("carbon.{name}_std"), std.to_string()));
                        }
                        Spectrum::Uniform => {
                            out.push((format!("carbon.{name}"), "\"uniform\"".into()))
                        }
                        Spectrum::Table { energy, value } => {
                            out.push((format!("carbon.{name}"), "\"table\"".into()));
                            out.push((
                                format!("carbon.{name}_table"),
                                rate_text(&Rate::Table {
                                    energy: energy.clone(),
                                    value: value.clone(),
                                }),
                            ));
                        }
                    }
                }
                let (a, b, c) = spec.proton_energy;
                out.push(("carbon.proton_energy".into(), format!("[{a}, {b}, {c}]")));
                let (a, b, c) = spec.neutron_energy;
                out.push(("carbon.neutron_energy".into(), format!("[{a}, {b}, {c}]")));
                out.push(("carbon.sigma_t_n".into(), rate_text(&spec.neutron.sigma_t)));
                out.push(("carbon.kerma_n".into(), rate_text(&spec.neutron.kerma)));
                out.push((
                    "carbon.proton_alpha".into(),
                    spec.proton_stopping.alpha().to_string(),
                ));
                out.push((
                    "carbon.proton_p".into(),
                    spec.proton_stopping.p().to_string(),
                ));
                out.push(("carbon.secondary.Q".into(), spec.secondary_q.to_string()));
                out.push((
                    "carbon.secondary.theta_c".into(),
                    spec.secondary_theta_c.to_string(),
                ));
                if let Some(b) = spec.band_halfwidth {
                    out.push(("observables.band_halfwidth".into(), b.to_string()));
                }
            }
        }
        out.push((
            "output.dir".into(),
            format!("{:?}", self.out_dir.display().to_string()),
        ));
        if let Some(t) = self.threads {
            out.push(("run.threads".into(), t.to_string()));
        }
        out.push(("run.seed".into(), self.seed.to_string()));
        out
    }

    /// The studies write into `out_dir` unless the caller already chose a directory.
    pub fn with_out_dir(mut self, dir: PathBuf) -> Self {
        self.out_dir = dir;
        self
    }
}
