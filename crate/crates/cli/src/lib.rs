//! Command-line front end: `simulate`, `sweep`, and `batch` write plain-text
//! tables plus a digest manifest into one directory per invocation.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Parser, Subcommand};

pub use commands::{BatchArgs, SimulateArgs, SweepArgs};
pub use output::{Manifest, OutputDir};

/// Exit status for a malformed or inconsistent configuration.
pub const EXIT_CONFIG: i32 = 1;
/// Exit status for a failure while running or writing output.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "configuration error: {e:#}"),
            CliError::Runtime(e) => write!(f, "run failed: {e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(
    name = "pinned-billiards",
    version,
    about = "Random-collision simulator for pinned billiard-ball lattices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One seeded run with snapshots, histograms, profiles and correlations.
    Simulate(SimulateArgs),
    /// Half-plane energy profiles across lattice sizes.
    Sweep(SweepArgs),
    /// Many seeds on one lattice; per-run velocity correlations.
    Batch(BatchArgs),
    /// List the named lattice presets.
    Presets,
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a).map(drop),
        Command::Sweep(a) => commands::sweep(a).map(drop),
        Command::Batch(a) => commands::batch(a).map(drop),
        Command::Presets => {
            commands::list_presets();
            Ok(())
        }
    }
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
