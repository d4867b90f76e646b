use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use critheat::experiments::{run_config, ExperimentConfig, ExperimentKind};
use critheat::Error;

/// Experiments on the energy-critical heat equation near its ground state.
#[derive(Parser, Debug)]
#[command(name = "critheat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file (defaults apply to every missing key).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for independent runs (outputs do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Classify data outside the operational neighbourhood of Q.
    #[arg(long, global = true)]
    override_neighborhood: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Spectral data of the linearized operator and coercivity sampling.
    Spectrum,
    /// Evolve one initial datum.
    Evolve,
    /// Shooting value of the unstable eigenvalue and zero-mode exponents.
    Shoot,
    /// Minimal-solution approximants and their forward fates.
    Minimal,
    /// Trichotomy verdict and/or threshold bisection.
    Classify,
    /// Self-similar diagnostics over a sweep of initial data.
    Selfsim,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Self::Spectrum => ExperimentKind::Spectrum,
            Self::Evolve => ExperimentKind::Evolve,
            Self::Shoot => ExperimentKind::Shoot,
            Self::Minimal => ExperimentKind::Minimal,
            Self::Classify => ExperimentKind::Classify,
            Self::Selfsim => ExperimentKind::Selfsim,
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_toml("")?,
    };
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.override_neighborhood {
        cfg.classify.override_neighborhood = true;
    }
    let cfg = cfg.with_kind(cli.command.kind())?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    }
    let summary = run_config(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&summary.summary).expect("summary serializes"));
    println!("config hash {}", summary.config_hash);
    println!("wrote {} files and {}", summary.files.len(), summary.manifest_path().display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
