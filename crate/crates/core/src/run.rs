//! Execution of a validated configuration.

use std::fmt::Write as _;
use std::time::Instant;

use crate::benchmark::{
    run_experiment_1, run_experiment_2, run_experiment_3, run_experiment_4, run_experiment_5,
    Metadata,
};
use crate::config::{Experiment, ExperimentSpec, RunConfig};
use crate::error::{Error, Result};
use crate::multispecies::run_experiment_6;
use crate::output::write_text;

pub const METADATA_FILE: &str = "run_metadata.txt";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metadata: Metadata,
    pub seconds: f64,
    pub threads: usize,
}

fn dispatch(cfg: &RunConfig) -> Result<Metadata> {
    match &cfg.spec {
        ExperimentSpec::Study(spec) => {
            let mut spec = (**spec).clone();
            spec.out_dir = Some(cfg.out_dir.clone());
            Ok(match cfg.experiment {
                Experiment::Bench => run_experiment_1(&spec)?.metadata,
                Experiment::Iterate => run_experiment_2(&spec)?.metadata,
                Experiment::Hg => run_experiment_3(&spec)?.metadata,
                Experiment::Angular => run_experiment_4(&spec)?.metadata,
                Experiment::Coupling => run_experiment_5(&spec)?.metadata,
                Experiment::Carbon => unreachable!("carbon runs use a multi-species spec"),
            })
        }
        ExperimentSpec::Carbon(spec) => {
            let mut spec = (**spec).clone();
            spec.out_dir = Some(cfg.out_dir.clone());
            Ok(run_experiment_6(&spec)?.metadata)
        }
    }
}

/// Run the configured study on `cfg.threads` workers and write its outputs
/// plus `run_metadata.txt` into `cfg.out_dir`.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))?;
    let threads = pool.current_num_threads();
    let start = Instant::now();
    let metadata = pool.install(|| dispatch(cfg))?;
    let seconds = start.elapsed().as_secs_f64();

    let mut text = String::new();
    let _ = writeln!(text, "# csda-transport {}", env!("CARGO_PKG_VERSION"));
    for (k, v) in cfg.materialized() {
        let _ = writeln!(text, "{k} = {v}");
    }
    let _ = writeln!(text, "\n# run");
    let _ = writeln!(text, "version = \"{}\"", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(text, "threads = {threads}");
    let _ = writeln!(text, "seed = {}", cfg.seed);
    let _ = writeln!(text, "wall_seconds = {seconds:.3}");
    if let Some(t) = &cfg.physics_table {
        let _ = writeln!(text, "physics_table = {:?}", t.display().to_string());
    }
    for (k, v) in &metadata {
        let _ = writeln!(text, "{k} = {v}");
    }
    write_text(&cfg.out_dir.join(METADATA_FILE), &text)?;
    Ok(RunOutcome {
        metadata,
        seconds,
        threads,
    })
}
