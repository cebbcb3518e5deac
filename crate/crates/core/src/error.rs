use thiserror::Error;

use crate::lattice::LatticePoint;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum HarmlatError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point {0} is not in the set")]
    NotInSet(LatticePoint),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("tolerance {tol:e} not reached; best estimate has error {achieved:e}")]
    ToleranceUnreachable { tol: f64, achieved: f64, best: Vec<f64> },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarmlatError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarmlatError::InvalidInput(msg.into()))
}

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarmlatError::Precondition(msg.into()))
}
