//! `mdev`: moderate-deviation experiments from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::output::{write_outputs, RunClock};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] mdev_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mdev", version, about = "Moderate-deviation probabilities, confidence intervals and estimator efficiency")]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "MDEV_THREADS")]
    threads: Option<usize>,

    /// Write results here (atomically) with a run manifest beside them,
    /// instead of printing to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Probability that a standard Gaussian vector leaves tΩ.
    ExitProb(commands::ExitProbArgs),
    /// Moderate-deviation and normal confidence intervals with simulated coverage.
    Ci(commands::CiArgs),
    /// Solve the mean-matching exponential tilt m(h) = v.
    Tilt(commands::TiltArgs),
    /// Run an efficiency experiment from a JSON configuration.
    Simulate(commands::SimulateArgs),
    /// Check the local regularity and body assumptions.
    CheckAssumptions(commands::CheckArgs),
    /// Moderate-deviation and normal two-sided quantiles.
    QuantileTable(commands::QuantileArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ExitProb(_) => "exit-prob",
            Command::Ci(_) => "ci",
            Command::Tilt(_) => "tilt",
            Command::Simulate(_) => "simulate",
            Command::CheckAssumptions(_) => "check-assumptions",
            Command::QuantileTable(_) => "quantile-table",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let clock = RunClock::start();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure the thread pool: {e}")))?;
    }
    // fail before a long run rather than after it
    if let Some(dir) = cli.out.as_deref().and_then(|p| p.parent()).filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let threads = rayon::current_num_threads();
    let name = cli.command.name();
    let result = match &cli.command {
        Command::ExitProb(a) => commands::exit_prob(a)?,
        Command::Ci(a) => commands::ci(a)?,
        Command::Tilt(a) => commands::tilt(a)?,
        Command::Simulate(a) => commands::simulate(a)?,
        Command::CheckAssumptions(a) => commands::check_assumptions(a)?,
        Command::QuantileTable(a) => commands::quantile_table(a)?,
    };
    match &cli.out {
        Some(path) => {
            let args = std::env::args().collect();
            for p in write_outputs(path, &result, name, args, threads, clock)? {
                eprintln!("mdev: wrote {}", p.display());
            }
        }
        None => {
            use std::io::Write;
            let primary = &result.artifacts[0].bytes;
            std::io::stdout().write_all(primary)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mdev: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
