//! `longnet` command-line driver. Every run writes into one output directory
//! holding a manifest, factor and partition files, and CSV tables.

mod commands;
mod settings;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use settings::Overrides;

#[derive(Parser)]
#[command(name = "longnet", version, about = "Intensity estimation for longitudinal networks")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Draw a ground truth and an edge list from the synthetic generator.
    Simulate(Overrides),
    /// Fit the initial estimate and, unless gated, merge intervals and refit.
    Estimate(Overrides),
    /// Segment a fitted temporal factor (`factors` on `partition`).
    Merge(Overrides),
    /// Score a fitted estimate against a simulated truth directory.
    Evaluate(Overrides),
    /// Equal-spacing error over a grid of interval counts, with the adaptive
    /// estimator as reference.
    Sweep(Overrides),
    /// Replicated comparison of the adaptive estimator with the baselines.
    Compare(Overrides),
    /// Cross-validated prediction error over held-out node pairs.
    Crossval(Overrides),
}

/// Failure reported as `error: <stage>: <message>`.
#[derive(Debug)]
pub struct CliError {
    pub stage: String,
    pub message: String,
    pub code: u8,
}

/// Exit code for bad settings or arguments.
pub const EXIT_SETTINGS: u8 = 2;
/// Exit code for unreadable or unwritable files.
pub const EXIT_IO: u8 = 3;
/// Exit code for a failed computation stage.
pub const EXIT_STAGE: u8 = 4;

impl CliError {
    pub fn new(stage: impl Into<String>, message: impl fmt::Display, code: u8) -> Self {
        Self {
            stage: stage.into(),
            message: message.to_string(),
            code,
        }
    }

    /// Converts a library error, preferring the stage it carries.
    pub fn core(stage: &str, e: longnet::Error) -> Self {
        match e {
            longnet::Error::Stage { stage: inner, source } => Self::core(inner, *source),
            longnet::Error::Io(io) => Self::new(stage, io, EXIT_IO),
            other => Self::new(stage, other, EXIT_STAGE),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl From<settings::SettingsError> for CliError {
    fn from(e: settings::SettingsError) -> Self {
        Self::new("settings", e, EXIT_SETTINGS)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Commands::Simulate(o) => commands::simulate(o),
        Commands::Estimate(o) => commands::estimate(o),
        Commands::Merge(o) => commands::merge(o),
        Commands::Evaluate(o) => commands::evaluate(o),
        Commands::Sweep(o) => commands::sweep(o),
        Commands::Compare(o) => commands::compare(o),
        Commands::Crossval(o) => commands::crossval(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
