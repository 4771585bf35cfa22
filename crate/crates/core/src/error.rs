use thiserror::Error;

use crate::quadrature::QuadResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("series truncation failed: achieved error bound {achieved:e} after {terms} terms")]
    TruncationFailure { achieved: f64, terms: usize },

    #[error("quadrature did not reach tolerance: value {} ± {:e} after {} evaluations", .partial.value, .partial.error_estimate, .partial.evaluations)]
    Quadrature { partial: QuadResult },

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("invalid resolution: {0}")]
    InvalidResolution(String),

    #[error("solver refused: {0}")]
    Refused(String),

    #[error("no bracket: {0}")]
    NoBracket(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
