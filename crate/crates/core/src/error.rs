use thiserror::Error;

use crate::solver::PcgReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("spectrum is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("no observed cells")]
    NoObservations,

    #[error("observed values have zero variance")]
    ZeroVariance,

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error(
        "conjugate gradient did not converge after {} iterations (relative residual {:.3e})",
        .0.iterations,
        .0.relative_residual
    )]
    NotConverged(PcgReport),

    #[error("singular neighbor system at observed cell {0}")]
    SingularSystem(usize),

    #[error("circulant embedding failed: negative eigenvalue mass {clamp:.3e} exceeds tolerance")]
    EmbeddingFailure { clamp: f64 },

    #[error("dense model with {m} cells exceeds the cap of {cap}")]
    DenseCapExceeded { m: usize, cap: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn mismatch(expected: impl std::fmt::Debug, actual: impl std::fmt::Debug) -> Self {
        Error::DimensionMismatch {
            expected: format!("{expected:?}"),
            actual: format!("{actual:?}"),
        }
    }
}
