//! `pnmtrem`: fit, simulate, Monte Carlo and prediction for the first-order
//! probit-normal marginalized transition random-effects model.
//!
//! Exit codes: 0 success, 1 unexpected failure (I/O while writing results),
//! 2 data, spec or configuration error, 3 non-convergence.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pnmtrem_core::Error;

use config::{FileConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "pnmtrem", version, about = "Probit-normal marginalized transition random-effects models")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "PNMTREM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit both stages and report estimates, SEs, Wald tests and the GLM comparison.
    Fit(Opts),
    /// Simulate a panel under the truth configuration.
    Simulate(Opts),
    /// Monte Carlo study: simulate, fit and summarize bias, SE and coverage.
    Mc(Opts),
    /// Fit, then write empirical-Bayes probability surfaces and accuracy metrics.
    Predict(Opts),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Long-format panel CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// ModelSpec TOML binding columns to designs.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Gauss-Hermite order [default: 20].
    #[arg(long)]
    pub quad_order: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol_score: Option<f64>,
    #[arg(long)]
    pub tol_loglik: Option<f64>,
    /// Monte Carlo replications [default: 200].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Simulate with the exact constraint solution instead of the linearization.
    #[arg(long)]
    pub exact_delta: bool,
}

/// A failed run and its exit code.
#[derive(Debug)]
pub struct Fail {
    pub code: u8,
    pub message: String,
}

impl Fail {
    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn convergence(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn io(e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence { .. }
            | Error::SingularInformation { .. }
            | Error::LineSearch { .. }
            | Error::QuadratureRange { .. }
            | Error::NonFinite(_)
            | Error::SingularLinearization { .. }
            | Error::Harness { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<(), Fail> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let (opts, cmd): (&Opts, fn(&RunConfig) -> Result<(), Fail>) = match &cli.command {
        Command::Fit(o) => (o, commands::fit),
        Command::Simulate(o) => (o, commands::simulate),
        Command::Mc(o) => (o, commands::mc),
        Command::Predict(o) => (o, commands::predict),
    };
    let cfg = RunConfig::resolve(opts, cli.threads, file)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(Fail::io)?;
    pool.install(|| cmd(&cfg))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
