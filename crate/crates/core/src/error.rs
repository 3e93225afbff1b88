//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("invalid resolution: {0}")]
    InvalidResolution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("convex function domain violation: {0}")]
    FunctionDomain(String),

    #[error("matrix is not bistochastic: {0}")]
    NotBistochastic(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("infeasible constraint set: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed field file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
