//! `dah`: command-line tools for the days-alive-and-at-home endpoint.
//!
//! Subcommands cover the full workflow: `simulate` draws synthetic cohorts,
//! `fit` estimates a model from patient data, `diagnose` produces residual
//! worm plots and resampling Q–Q checks, `compare` scores the benchmark
//! models against the composite model on the same data, `calibrate` solves
//! for the treatment coefficient matching a target median benefit, and
//! `power` runs the Monte Carlo rejection-rate pipeline over a sample-size
//! grid.
//!
//! Every run writes its outputs atomically into one directory together with
//! a manifest recording the resolved configuration, the master seed, input
//! and output checksums, and the tool version; rerunning a command with the
//! same configuration and seed reproduces each output byte for byte.
//! Failures print one line of JSON to stderr and exit with 2
//! (configuration), 3 (data), or 4 (numerical failure).

mod commands;
mod config;
mod data;
mod io;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Failure categories, each with a fixed exit code and JSON tag.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration file or command line (exit 2).
    Config(String),
    /// Unreadable or invalid input data (exit 3).
    Data(String),
    /// Fitting, simulation, or calibration failure (exit 4).
    Numerical(String),
    /// Filesystem trouble while writing outputs (exit 1).
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
            Failure::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Data(_) => "data",
            Failure::Numerical(_) => "numerical",
            Failure::Io(_) => "io",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind(),
                "message": self.message(),
                "exit_code": self.exit_code(),
            }
        })
        .to_string()
    }
}

impl From<dah_core::Error> for Failure {
    fn from(e: dah_core::Error) -> Self {
        use dah_core::Error;
        match &e {
            Error::InvalidData(_)
            | Error::DimensionMismatch { .. }
            | Error::OutOfSupport { .. }
            | Error::InvalidDesign(_) => Failure::Data(e.to_string()),
            Error::ParameterDomain(_)
            | Error::ProbabilityDomain(_)
            | Error::NonConvergence(_)
            | Error::Numerical(_) => Failure::Numerical(e.to_string()),
        }
    }
}

/// Options shared by every subcommand. Flags override the matching
/// configuration keys; the manifest records the resolved values.
#[derive(Debug, Args)]
pub struct Overrides {
    /// Scenario configuration file (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Input data: per-patient component CSV or long daily-location CSV.
    #[arg(long, global = true, value_name = "FILE")]
    pub data: Option<PathBuf>,

    /// Master seed for every random stream in the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Worker threads for replicate loops (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Monte Carlo replicates per power-curve point.
    #[arg(long, global = true)]
    pub reps: Option<usize>,

    /// Test size for the power pipeline.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,

    /// Information-criterion penalty per parameter.
    #[arg(long, global = true)]
    pub gaic_k: Option<f64>,

    /// Outcome definition: "dah" (nursing days count as home only for
    /// patients admitted from nursing care) or "dooh" (any day out of
    /// hospital counts).
    #[arg(long, global = true, value_parser = ["dah", "dooh"])]
    pub dah_definition: Option<String>,

    /// Protocol hospital stay length in days.
    #[arg(long, global = true)]
    pub ptilde: Option<i64>,

    /// Model to use: dnc | zabb | zab | flognormal | zifpoisson | fnb.
    #[arg(long, global = true, value_parser = ["dnc", "zabb", "zab", "flognormal", "zifpoisson", "fnb"])]
    pub model: Option<String>,
}

#[derive(Debug, Parser)]
#[command(
    name = "dah",
    version,
    about = "Modeling, diagnostics, and trial design for the days-alive-and-at-home endpoint"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate a model from patient data and write the coefficient table.
    Fit,
    /// Draw a synthetic cohort and write it as component or trajectory CSV.
    Simulate,
    /// Residual worm plots, resampling Q-Q check, and model discrepancy.
    Diagnose,
    /// Score every benchmark model against the composite model on one dataset.
    Compare,
    /// Solve for the treatment coefficient giving a target median benefit.
    Calibrate,
    /// Monte Carlo power and type-I error over a sample-size grid.
    Power,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Simulate => "simulate",
            Command::Diagnose => "diagnose",
            Command::Compare => "compare",
            Command::Calibrate => "calibrate",
            Command::Power => "power",
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let settings = config::resolve(cli.command.name(), &cli.overrides)?;
    if let Some(threads) = settings.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Config(format!("cannot build a {threads}-thread pool: {e}")))?;
    }
    match cli.command {
        Command::Fit => commands::fit::run(&settings),
        Command::Simulate => commands::simulate::run(&settings),
        Command::Diagnose => commands::diagnose::run(&settings),
        Command::Compare => commands::compare::run(&settings),
        Command::Calibrate => commands::calibrate::run(&settings),
        Command::Power => commands::power::run(&settings),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(failure) = run(cli) {
        eprintln!("{}", failure.to_json());
        std::process::exit(failure.exit_code());
    }
}
