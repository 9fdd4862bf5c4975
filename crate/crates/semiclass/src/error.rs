//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction, sampling, propagation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A parameter is outside its admissible range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation needs an optional capability (analytic derivative, closed-form
    /// moment, ...) that the supplied object does not provide.
    #[error("missing capability: {0}")]
    MissingCapability(String),

    /// A trajectory or field value left the trusted numerical range.
    #[error("numerical instability: {0}")]
    Unstable(String),

    /// File format violation while reading a checkpoint.
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
