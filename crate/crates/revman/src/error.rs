//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the simulator and its solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration document failed validation; the message names the field.
    #[error("invalid config: {0}")]
    Config(String),

    /// The GP Laplace fit did not converge.
    #[error("gp laplace fit failed after {iterations} iterations: {reason}")]
    GpFitFailure { iterations: usize, reason: String },

    /// A matrix expected to be positive definite failed Cholesky even after
    /// jitter escalation.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// The reference simplex exceeded its pivot budget.
    #[error("lp solver: {0}")]
    Solver(String),

    /// Posterior sampling could not produce a usable draw.
    #[error("posterior sampling: {0}")]
    Sampling(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
