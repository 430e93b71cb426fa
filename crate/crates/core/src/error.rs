use thiserror::Error;

use crate::simulators::SimulationError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Gram matrix factorization failed after jitter escalation (degenerate training data)")]
    Degenerate,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Simulation(#[from] SimulationError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} must be finite, got {value}")))
    }
}
