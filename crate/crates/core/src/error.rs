//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (bad CSV row, unparseable value, bad zone map).
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally valid data that violates a dataset invariant
    /// (duplicate keys, mixed layers, dimension mismatches).
    #[error("integrity error: {0}")]
    Integrity(String),

    /// Invalid configuration or arguments for an operation.
    #[error("config error: {0}")]
    Config(String),

    /// Model file cannot be read back (bad magic, truncation, syntax).
    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    /// Model file is well formed but from an unsupported version or kind.
    #[error("model version error: {0}")]
    ModelVersion(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// An internal invariant was violated; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors caused by user-supplied data or configuration,
    /// as opposed to internal failures.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Internal(_))
    }
}
