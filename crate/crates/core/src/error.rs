use thiserror::Error;

use crate::spectral::SpectralSequence;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A flow left the near-identity regime.
    #[error("flow diverged at tau = {tau}: norm grew from {initial_norm:.3e} to {norm:.3e}")]
    FlowDivergence {
        tau: f64,
        initial_norm: f64,
        norm: f64,
    },

    /// The time integrator produced a non-finite value. `last_good` is the
    /// state at `t`.
    #[error("solver diverged at t = {t}")]
    SolverDivergence {
        t: f64,
        last_good: Box<SpectralSequence>,
    },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn invalid_config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidConfig(msg.into()))
}
