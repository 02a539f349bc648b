use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const MATH: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("math error: {0}")]
    Math(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Math(_) => exit::MATH,
            Self::Io { .. } => exit::IO,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<seqir_core::IntegratorError> for CliError {
    fn from(e: seqir_core::IntegratorError) -> Self {
        use seqir_core::{ChainError, IntegratorError as E};
        match e {
            E::InvalidConfig(_) | E::DimensionMismatch { .. } => Self::Config(e.to_string()),
            E::Chain(ChainError::StepTooLarge { .. }) => Self::Config(format!("simulation.dt: {e}")),
            _ => Self::Math(e.to_string()),
        }
    }
}

impl From<seqir_core::ThresholdError> for CliError {
    fn from(e: seqir_core::ThresholdError) -> Self {
        Self::Math(e.to_string())
    }
}

impl From<seqir_core::AnalysisError> for CliError {
    fn from(e: seqir_core::AnalysisError) -> Self {
        Self::Math(e.to_string())
    }
}
