use std::path::PathBuf;

use egta_core::game::FormatError;
use thiserror::Error;

/// Failures that abort a command before or between cells. All of them
/// map to exit status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    ConfigAt { path: PathBuf, line: usize, message: String },

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    GameFile {
        path: PathBuf,
        #[source]
        source: FormatError,
    },

    #[error(transparent)]
    Core(#[from] egta_core::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
