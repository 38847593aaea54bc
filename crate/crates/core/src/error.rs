use thiserror::Error;

use crate::complex::SpaceTag;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive Jacobian determinant {det:e} in element {element} at quadrature point {point}")]
    NonPositiveJacobian { element: usize, point: usize, det: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("space mismatch: expected {expected:?}, found {found:?}")]
    SpaceMismatch { expected: SpaceTag, found: SpaceTag },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("singular matrix ({0})")]
    SingularMatrix(String),

    #[error("iterative solver did not converge in {maxit} iterations (relative residual {residual:e})")]
    NoConvergence { maxit: usize, residual: f64 },

    #[error("relative residual {residual:e} of the {system} solve exceeds {limit:e}")]
    ResidualTooLarge { system: &'static str, residual: f64, limit: f64 },

    #[error("conservation violated at step {step}: {what}")]
    ConservationViolated { step: usize, what: String },

    #[error("manufactured solution self-check failed: {0}")]
    SelfCheckFailed(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
