use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use csda_transport::config::{parse_config, parse_config_str, Experiment, RunConfig};
use csda_transport::run::{execute, METADATA_FILE};
use csda_transport::{Error, Result};

#[derive(Parser)]
#[command(
    name = "csda-transport",
    version,
    about = "Deterministic CSDA charged-particle transport"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults are used when omitted
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory, overrides `output.dir`
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Worker threads, overrides `run.threads`
    #[arg(long, short = 'j')]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Grid refinement against the exact ballistic solution
    Bench(RunArgs),
    /// Source-iteration history and contraction estimate
    Iterate(RunArgs),
    /// Beam broadening under Henyey-Greenstein scattering
    Hg(RunArgs),
    /// Ordinate count and cone-angle study
    Angular(RunArgs),
    /// Iteration counts against the scattering anisotropy
    Coupling(RunArgs),
    /// Carbon beam with secondary protons and neutrons
    Carbon(RunArgs),
    /// Check a configuration and print every effective setting
    Validate {
        #[arg(long, short)]
        config: PathBuf,
    },
}

fn load(experiment: Experiment, args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => parse_config(path)?,
        None => parse_config_str(
            &format!("experiment = \"{experiment}\"\n"),
            std::path::Path::new("<defaults>"),
            std::path::Path::new("."),
        )?,
    };
    if cfg.experiment != experiment {
        return Err(Error::Config {
            key: "experiment".into(),
            msg: format!(
                "config is for `{}` but the `{experiment}` command was run",
                cfg.experiment
            ),
        });
    }
    if let Some(dir) = &args.out {
        cfg.out_dir = dir.clone();
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Error::Config {
                key: "--threads".into(),
                msg: "must be at least 1".into(),
            });
        }
        cfg.threads = Some(n);
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (experiment, args) = match cli.command {
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            for (k, v) in cfg.materialized() {
                println!("{k} = {v}");
            }
            return Ok(());
        }
        Command::Bench(a) => (Experiment::Bench, a),
        Command::Iterate(a) => (Experiment::Iterate, a),
        Command::Hg(a) => (Experiment::Hg, a),
        Command::Angular(a) => (Experiment::Angular, a),
        Command::Coupling(a) => (Experiment::Coupling, a),
        Command::Carbon(a) => (Experiment::Carbon, a),
    };
    let cfg = load(experiment, &args)?;
    let outcome = execute(&cfg)?;
    for (k, v) in &outcome.metadata {
        println!("{k} = {v}");
    }
    eprintln!(
        "{experiment}: done in {:.1} s on {} thread(s); outputs in {} (see {METADATA_FILE})",
        outcome.seconds,
        outcome.threads,
        cfg.out_dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
