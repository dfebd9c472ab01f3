//! CLI plumbing for the fracbat model: argument parsing, TOML
//! experiment configs, instrument-log ingestion, and the subcommand
//! implementations. The binary in `main.rs` is a thin wrapper around
//! [`run`].

pub mod commands;
pub mod config;
pub mod ingest;

use clap::{Parser, Subcommand};

/// Exit codes: 0 success, 2 usage/config/input error, 3 numerical or
/// model error.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Model(fracbat::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Model(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<fracbat::Error> for CliError {
    fn from(e: fracbat::Error) -> Self {
        match e {
            // Problems with user-supplied values or files are usage
            // errors; failures of the model itself are not.
            fracbat::Error::Parse { .. }
            | fracbat::Error::InvalidParameter(_)
            | fracbat::Error::NotEnoughData(_) => {
                CliError::Usage(format!("{e}"))
            }
            other => CliError::Model(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "fracbat",
    version,
    about = "Fractional-order (CPE + series R) battery model toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize an RC-ladder network approximating a CPE over a band
    Synthesize(commands::SynthesizeArgs),
    /// Simulate constant-current cycling over a ladder of currents
    Cycle(commands::CycleArgs),
    /// Extract model parameters from capacity and/or impedance data
    Fit(commands::FitArgs),
    /// Build a capacity curve from a raw instrument log (t, V, I)
    Ingest(commands::IngestArgs),
    /// Emit Bode and Nyquist tables for a model or network file
    Report(commands::ReportArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synthesize(args) => commands::synthesize(args),
        Command::Cycle(args) => commands::cycle(args),
        Command::Fit(args) => commands::fit(args),
        Command::Ingest(args) => commands::ingest(args),
        Command::Report(args) => commands::report(args),
    }
}
