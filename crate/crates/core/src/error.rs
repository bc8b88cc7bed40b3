//! Error type shared by all modules.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a construction precondition (block size not a
    /// power of two, footprint larger than the grid, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two objects that must agree in size do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Input data violates an invariant (non-finite values, forces outside
    /// the sensor range, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// A file does not follow the expected binary or text layout.
    #[error("bad file format: {0}")]
    Format(String),

    /// An experiment config file failed schema validation. The message
    /// names the offending field.
    #[error("config error: {0}")]
    Config(String),

    /// An operator is numerically unusable (zero spectrum).
    #[error("degenerate operator: {0}")]
    Degenerate(String),

    /// Underlying I/O failure, tagged with the path involved.
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
