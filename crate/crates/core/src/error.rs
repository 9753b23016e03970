//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    InvalidInput(String),

    #[error("no valid rows parsed from {path}")]
    NoValidRows { path: String },

    #[error("timestamps not strictly increasing at data row {index} (t={timestamp})")]
    NonMonotoneTimestamps { index: usize, timestamp: i64 },

    #[error("series too short: need at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("no common timestamps across instruments")]
    EmptyIntersection,

    #[error("scale {scale} exceeds series length {len}")]
    ScaleTooLarge { scale: usize, len: usize },

    #[error("scale {scale} exceeds a quarter of the series length {len}")]
    ScaleBeyondQuarter { scale: usize, len: usize },

    #[error("box of length {len} cannot determine a polynomial of order {order}")]
    UnderdeterminedFit { len: usize, order: usize },

    #[error("lag magnitude {lag} must be smaller than the series length {len}")]
    LagTooLarge { lag: i64, len: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty {side} tail: no values on that side")]
    EmptyTail { side: &'static str },

    #[error("too few tail points: need at least {needed}, got {got}")]
    TooFewTailPoints { needed: usize, got: usize },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
