//! `dirac-graph <bands|solve|verify> --config path [--deflate k] [--out dir] [--seed n]`
//!
//! Exit codes: 0 success, 1 I/O, 2 configuration, 3 hypothesis, 4 solver,
//! 5 failed verification.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dirac_graph::Error;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "dirac-graph", version, about = "Dirac operators and bound states on periodic metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bloch band sweep and spectral gap report.
    Bands(Common),
    /// Bound states of the nonlinear equation on the closure.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Look for this many geometrically distinct states.
        #[arg(long, value_name = "K")]
        deflate: Option<usize>,
    },
    /// Numerical checks of the spectral and variational estimates.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suite to run; all suites when absent.
        #[arg(long, value_enum)]
        which: Option<Suite>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Gap,
    Cutoff,
    Interpolation,
    Norms,
    Hypotheses,
    Linking,
    Gn,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Gap,
        Suite::Cutoff,
        Suite::Interpolation,
        Suite::Norms,
        Suite::Hypotheses,
        Suite::Linking,
        Suite::Gn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Gap => "gap",
            Suite::Cutoff => "cutoff",
            Suite::Interpolation => "interpolation",
            Suite::Norms => "norms",
            Suite::Hypotheses => "hypotheses",
            Suite::Linking => "linking",
            Suite::Gn => "gn",
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Hypothesis(String),
    Solver(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Hypothesis(_) => 3,
            Failure::Solver(_) => 4,
            Failure::Verification(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Config(m) | Failure::Hypothesis(m) | Failure::Solver(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::Hypothesis { .. } => Failure::Hypothesis(m),
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => Failure::Io(m),
            Error::Identity(_) | Error::Quadrature(_) => Failure::Verification(m),
            ref e if e.is_solver_failure() || matches!(e, Error::DecompositionIncomplete) => Failure::Solver(m),
            _ => Failure::Config(m),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn prepare(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output = std::env::current_dir()?.join(out);
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bands(common) => commands::bands(&prepare(&common)?),
        Command::Solve { common, deflate } => commands::solve(&prepare(&common)?, deflate),
        Command::Verify { common, which } => {
            let suites = which.map_or(Suite::ALL.to_vec(), |w| vec![w]);
            commands::verify(&prepare(&common)?, &suites)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
