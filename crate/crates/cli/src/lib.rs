//! Command-line driver for Grover decoherence experiments.
//!
//! Exit codes: 0 success, 1 validation failure, 2 bad configuration or any
//! other error.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{CommandKind, CommonArgs, ExperimentConfig, HusimiArgs, ValidateArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ValidationFailed(_) => 1,
            _ => 2,
        }
    }
}

impl From<grover_decoherence::Error> for CliError {
    fn from(e: grover_decoherence::Error) -> Self {
        use grover_decoherence::Error as E;
        match e {
            E::InvalidConfig(_) | E::TooLarge { .. } | E::IndexOutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Simulation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "grover-dd", version, about = "Grover search under gate-level amplitude damping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Noiseless circuit against sin^2((t + 1/2) omega_G).
    Ideal {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Ensemble-averaged w_G, w_4 and fidelity series, one file per rate.
    Trajectories {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Decay-rate fits over a grid of sizes and rates, with the C summary.
    Scan {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Husimi phase-space grids at selected iterations.
    Husimi {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        husimi: HusimiArgs,
    },
    /// Trajectory ensemble against exact density-matrix evolution.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        validate: ValidateArgs,
    },
}

/// Resolves the configuration and runs the command.
pub fn execute(command: &Command) -> Result<Vec<std::path::PathBuf>, CliError> {
    match command {
        Command::Ideal { common } => {
            commands::ideal(&ExperimentConfig::resolve(CommandKind::Ideal, common, None, None)?)
        }
        Command::Trajectories { common } => commands::trajectories(&ExperimentConfig::resolve(
            CommandKind::Trajectories,
            common,
            None,
            None,
        )?),
        Command::Scan { common } => {
            commands::scan(&ExperimentConfig::resolve(CommandKind::Scan, common, None, None)?)
        }
        Command::Husimi { common, husimi } => commands::husimi(&ExperimentConfig::resolve(
            CommandKind::Husimi,
            common,
            Some(husimi),
            None,
        )?),
        Command::Validate { common, validate } => commands::validate(&ExperimentConfig::resolve(
            CommandKind::Validate,
            common,
            None,
            Some(validate),
        )?),
    }
}

/// Parses `args` (including the program name), runs, and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
