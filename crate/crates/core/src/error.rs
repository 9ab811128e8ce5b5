use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spline parameters: {0}")]
    InvalidSpline(String),
    #[error("coordinate {0} lies outside [0, 1]")]
    OutOfDomain(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid discretization: {0}")]
    InvalidSystem(String),
    #[error("zero pivot at elimination step {step} (|d| = {value:e})")]
    ZeroPivot { step: usize, value: f64 },
    #[error("negative M-norm squared {0:e}; mass matrix is not positive definite")]
    NegativeNorm(f64),
    #[error("slice [{lower}, {upper}] converged {found} of {expected} eigenpairs")]
    CountMismatch {
        slice: usize,
        lower: f64,
        upper: f64,
        expected: usize,
        found: usize,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("mismatched configurations: {0}")]
    ConfigMismatch(String),
}
