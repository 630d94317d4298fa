use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("curvature must be nonzero (got {0})")]
    ZeroCurvature(f64),

    #[error("radius {radius} violates the open-hemisphere bound sqrt(K)*R < pi/2")]
    Hemisphere { radius: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("points belong to different manifolds")]
    ClassMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} argument {value} outside its valid range by more than the rounding tolerance")]
    Domain { what: &'static str, value: f64 },

    #[error("point at norm {norm} lies outside the ball of radius {radius}")]
    OutOfBall { norm: f64, radius: f64 },

    #[error(
        "line search at iteration {iteration} gave up after {probes} probes \
         (bracket [{lo}, {hi}], residual {residual:e}, tolerance {eps_hat:e})"
    )]
    LineSearch {
        iteration: usize,
        probes: usize,
        lo: f64,
        hi: f64,
        residual: f64,
        eps_hat: f64,
    },

    #[error("no convergence after {iterations} iterations (gradient norm {grad_norm:e})")]
    NoConvergence { iterations: usize, grad_norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
