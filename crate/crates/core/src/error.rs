use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} index {index} out of range (count {count})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        count: usize,
    },

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported polynomial degree {0} (supported: 1, 2, 3)")]
    UnsupportedDegree(usize),

    #[error("quadrature of degree {requested} requested, maximum supported is {max}")]
    QuadratureDegree { requested: usize, max: usize },

    #[error("non-finite coefficient value on {location}")]
    NonFiniteCoefficient { location: String },

    #[error("problem `{0}` has no exact solution or source term")]
    NoExactSolution(String),

    #[error("time step failed at t = {time}, Newton iteration {iteration}, residual {residual:e}: {reason}")]
    StepFailure {
        time: f64,
        iteration: usize,
        residual: f64,
        reason: String,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
