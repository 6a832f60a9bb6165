//! Command-line front end for the cvqkd simulator.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 runtime failure,
//! 3 detection alarm (detect subcommand in gating mode).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Overrides};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Alarm,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError::Runtime(message.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Alarm => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Runtime(m) => write!(f, "runtime failure: {m}"),
            CliError::Alarm => write!(f, "detection alarm"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cvqkd",
    version,
    about = "Continuous-variable QKD simulator with balanced homodyne detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the session seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the pulse count.
    #[arg(long)]
    pulses: Option<u64>,
    /// Override the detection significance level.
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory (default: current directory).
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let overrides = Overrides {
            seed: self.seed,
            pulses: self.pulses,
            alpha: self.alpha,
        };
        ExperimentConfig::load(&self.config, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one session; write transcript.csv and report.json.
    Simulate(RunArgs),
    /// Evaluate the closed forms over a threshold grid; write sweep.csv.
    Sweep(RunArgs),
    /// Find the gain-maximizing threshold; write optimum.json.
    Optimize(RunArgs),
    /// Run paired sessions with and without the configured eavesdropper;
    /// write attack_report.json.
    Attack(RunArgs),
    /// Run one session and its distribution tests; write detection.json.
    /// With "detect": {"gate": true} in the config, an alarm exits 3.
    Detect(RunArgs),
    /// Regenerate the reference dataset: distribution curves, histograms,
    /// per-phase statistics, and operating points.
    #[command(name = "reproduce-paper")]
    ReproducePaper {
        /// Output directory.
        #[arg(long, default_value = "reference-out")]
        out: PathBuf,
        /// Override the built-in seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => commands::cmd_simulate(&args.load()?, &args.out),
        Command::Sweep(args) => commands::cmd_sweep(&args.load()?, &args.out),
        Command::Optimize(args) => commands::cmd_optimize(&args.load()?, &args.out),
        Command::Attack(args) => commands::cmd_attack(&args.load()?, &args.out),
        Command::Detect(args) => commands::cmd_detect(&args.load()?, &args.out),
        Command::ReproducePaper { out, seed } => commands::cmd_reproduce_paper(&out, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvqkd: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
