mod config;
mod error;
mod experiments;
mod output;
mod svg;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Experiment, ExperimentConfig};
use error::{invalid, CliError, Result};
use output::OutputDir;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "NLFP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "nlfp", version, about = "Nonlocal Fokker-Planck experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output.directory`, then $NLFP_OUT_DIR, then ./nlfp-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the results of an earlier run in the output directory.
    #[arg(long)]
    overwrite: bool,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Write CSV tables only.
    #[arg(long)]
    no_svg: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Densities of the nonlocal and local equations at the configured times.
    Solve(RunArgs),
    /// Equilibria, their distance to the Gaussian and their Fourier decay.
    Equilibrium(RunArgs),
    /// Convergence rates in epsilon and in time.
    Rates(RunArgs),
    /// Berry-Esseen rates and characteristic-function bounds.
    Clt(RunArgs),
    /// Closed-form cumulants against grid and particle estimates.
    Cumulants(RunArgs),
    /// Lyapunov certificates for the configured weight.
    Lyapunov(RunArgs),
    /// Lower bounds on balls around the origin.
    Positivity(RunArgs),
    /// Exponential moments of the equilibria of compactly supported kernels.
    Tails(RunArgs),
    /// Every experiment above, in order.
    All(RunArgs),
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::Solve(a) => (Experiment::Solve, a),
            Command::Equilibrium(a) => (Experiment::Equilibrium, a),
            Command::Rates(a) => (Experiment::Rates, a),
            Command::Clt(a) => (Experiment::Clt, a),
            Command::Cumulants(a) => (Experiment::Cumulants, a),
            Command::Lyapunov(a) => (Experiment::Lyapunov, a),
            Command::Positivity(a) => (Experiment::Positivity, a),
            Command::Tails(a) => (Experiment::Tails, a),
            Command::All(a) => (Experiment::All, a),
        }
    }
}

fn execute(experiment: Experiment, args: RunArgs) -> Result<PathBuf> {
    let text = fs::read_to_string(&args.config).map_err(|source| CliError::Io { path: args.config.clone(), source })?;
    let cfg = ExperimentConfig::from_text(&text)?;
    if let Some(named) = cfg.experiment {
        if named != experiment {
            return Err(invalid("experiment.name", format!("config is for `{named}` but `{experiment}` was requested")));
        }
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(invalid("--threads", "must be at least 1"));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let dir = args
        .out
        .or_else(|| cfg.directory.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("nlfp-out"));
    let mut out = OutputDir::prepare(&dir, args.overwrite, cfg.svg && !args.no_svg)?;
    let outcome = experiments::run(experiment, &cfg, &mut out);
    if let Err(e) = &outcome {
        out.note(format!("run failed: {e}"));
    }
    out.write_manifest(&cfg, experiment)?;
    outcome.map(|()| dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (experiment, args) = Cli::parse().command.split();
    match execute(experiment, args) {
        Ok(dir) => {
            println!("{experiment}: results in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nlfp {experiment}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
