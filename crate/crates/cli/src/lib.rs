//! Command-line front end: grid files, run configuration, mean handling
//! and the subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod gridfile;
pub mod trend;

use args::{Cli, Command};
use gridfile::GridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    MaxIterations,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Converged => 0,
            Outcome::MaxIterations => 2,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<pspec::Error> for CliError {
    fn from(e: pspec::Error) -> Self {
        use pspec::Error as E;
        match e {
            E::InvalidArgument(_) | E::DimensionMismatch { .. } | E::NoObservations | E::ZeroVariance | E::DenseCapExceeded { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Condexp(a) => commands::condexp(a),
        Command::Condsim(a) => commands::condsim(a),
        Command::Study(a) => commands::study(a),
        Command::Simulate(a) => commands::simulate(a),
    }
}
