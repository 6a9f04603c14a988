//! Error type shared across the crate, with a fixed mapping to process exit codes.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration or arguments supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid argument to an operation (shape mismatch, index out of range).
    #[error("argument error: {0}")]
    Argument(String),

    /// Malformed data on disk (frame numbering gaps, mixed dimensions, ...).
    #[error("format error: {0}")]
    Format(String),

    /// A required file or directory does not exist.
    #[error("not found: {0}")]
    NotFound(PathBuf),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Non-finite value produced during computation.
    #[error("numerical error in `{term}` at step {step}")]
    Numerical { step: u64, term: String },

    /// Checkpoint container does not match its manifest.
    #[error("checkpoint corruption: {0}")]
    Corruption(String),

    /// A metric could not be evaluated (e.g. blank frames carry no mass).
    #[error("metric error: {0}")]
    Metric(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 data/format, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) => 1,
            Error::Format(_) | Error::NotFound(_) | Error::Io { .. } | Error::Corruption(_) => 2,
            Error::Numerical { .. } => 3,
            Error::Metric(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
