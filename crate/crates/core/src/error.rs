use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the unmixing toolkit.
#[derive(Debug, Error)]
pub enum UnmixError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    NumericalFailure { iteration: usize, message: String },

    #[error("format error in field `{field}` at byte offset {offset}: {message}")]
    Format {
        field: &'static str,
        offset: u64,
        message: String,
    },

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl UnmixError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        UnmixError::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        UnmixError::DegenerateData(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        UnmixError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, UnmixError>;
