//! File formats, configuration, and command implementations behind the
//! `molmae` binary. Exposed as a library so integration tests can drive
//! the same code paths the binary uses.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod dataset;

use std::fmt;

/// Failure classes mapped to process exit codes: configuration errors
/// exit 2, data errors exit 3, numeric failures exit 4.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numeric(m) => {
                write!(f, "{}: {}", self.kind(), m)
            }
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<molmae_core::train::TrainError> for CliError {
    fn from(e: molmae_core::train::TrainError) -> Self {
        use molmae_core::train::TrainError;
        match e {
            TrainError::NumericFailure { .. } => CliError::Numeric(e.to_string()),
            TrainError::ConfigMismatch(_) | TrainError::NonPositiveStep => {
                CliError::Config(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}
