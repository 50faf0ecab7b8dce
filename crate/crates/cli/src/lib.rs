//! Command-line front end: model files, command dispatch, reports and exit codes.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

/// Failures, each with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit 1: unreadable or invalid model file or flags.
    #[error("invalid input: {0}")]
    Config(String),
    /// Exit 2: the request cannot be met (off-grid weight level, dimension condition).
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Exit 3: a configured size cap would be exceeded.
    #[error("size cap exceeded: {0}")]
    Size(String),
    /// Exit 1: the report could not be written.
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Size(_) => 3,
        }
    }
}

impl From<singleshot_core::Error> for CliError {
    fn from(e: singleshot_core::Error) -> Self {
        use singleshot_core::Error;
        match e {
            Error::Contract(m) | Error::Range(m) => CliError::Config(m),
            Error::Dimension(m) => CliError::Infeasible(m),
            Error::Size(m) => CliError::Size(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "singleshot", version, about = "Single-shot work extraction bounds and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Model file (TOML).
    #[arg(long, global = true, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Failure probability in [0, 1).
    #[arg(long, global = true, value_name = "R")]
    pub epsilon: Option<f64>,
    /// Width of the final weight window, in energy units.
    #[arg(long, global = true, value_name = "R")]
    pub delta: Option<f64>,
    /// Weight level, in energy units; must lie on the ladder.
    #[arg(long, global = true, value_name = "R")]
    pub w: Option<f64>,
    #[arg(long, global = true, value_name = "N")]
    pub samples: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub output: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Maximal single-level work, grid-achievable level and h-map.
    Work,
    /// Work of formation of the `[formation] target` state.
    Formation,
    /// Work into a window of weight levels of width --delta.
    Multilevel,
    /// Free-energy bound on a proposed transfer, from the `[transfer]` section.
    TransferCheck,
    /// Monte Carlo statistics of random shell isometries.
    Typicality,
    /// Brute-force cross-checks of the analytic results.
    Oracle,
    /// Parse and validate the model file.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Work => "work",
            Command::Formation => "formation",
            Command::Multilevel => "multilevel",
            Command::TransferCheck => "transfer-check",
            Command::Typicality => "typicality",
            Command::Oracle => "oracle",
            Command::Validate => "validate",
        }
    }
}

/// Runs one command and writes its report. Returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let path = cli.model.as_ref().ok_or_else(|| CliError::Config("--model FILE is required".into()))?;
    let config = config::ModelConfig::load(path)?;
    let outcome = commands::dispatch(cli, &config)?;
    let text = match cli.output {
        Format::Json => outcome.report.to_json()?,
        Format::Csv => outcome.report.to_csv()?,
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    if let Some(msg) = &outcome.message {
        eprintln!("{msg}");
    }
    Ok(outcome.exit_code)
}
