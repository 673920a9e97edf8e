use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the clustering and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {required} {what}, got {found}")]
    TooFew {
        what: &'static str,
        required: usize,
        found: usize,
    },
    #[error("coordinate {0} has zero variance")]
    ZeroVariance(usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("undefined: {0}")]
    Undefined(String),
}

impl Error {
    /// Whether the error stems from malformed or missing data rather than a
    /// numeric degeneracy of otherwise valid data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::TooFew { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
