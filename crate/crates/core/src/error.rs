//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A stated precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A correlation structure is degenerate (perfectly correlated lags,
    /// zero variance, or similar) and the requested quantity is undefined.
    #[error("degenerate correlation structure: {0}")]
    Degenerate(String),

    /// An enumerated sampling grid would exceed the configured cap.
    #[error("grid capped: M ~ 10^{log10_m:.3} exceeds cap {cap:.1e}")]
    GridCapped { log10_m: f64, cap: f64 },

    /// Covariance factorization failed even after the jitter ladder.
    #[error("factorization failed: {0}")]
    Factorization(String),

    /// A derived quantity violates one of its required constraints.
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
