use thiserror::Error;

use crate::sdp::SolveStatus;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("polynomial degree {0} is odd where an even degree is required")]
    OddDegree(usize),

    #[error("exponent {0} must be even and at least 2")]
    OddExponent(u32),

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("program is infeasible: {0}")]
    Infeasible(String),

    #[error("semidefinite solver ended with status {status:?}: {detail}")]
    Solver { status: SolveStatus, detail: String },

    #[error("minimizer extraction failed: gradient norm {grad_norm:.3e} exceeds {tolerance:.3e}")]
    Stationarity { grad_norm: f64, tolerance: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not enough usable data: {0}")]
    InsufficientData(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
