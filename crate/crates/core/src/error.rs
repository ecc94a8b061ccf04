use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("POVM element {index} is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPositive { index: usize, min_eig: f64 },

    #[error("POVM elements do not sum to the identity (max deviation {0:e})")]
    NotNormalized(f64),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid root bracket: f({lo}) = {f_lo:e} and f({hi}) = {f_hi:e} have the same sign")]
    InvalidBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("{method} did not converge within {iterations} iterations")]
    NonConvergence { method: &'static str, iterations: usize },

    #[error("feasibility undecided after {iterations} iterations (residual {residual:e}, bracket [{lo}, {hi}])")]
    Indeterminate { iterations: usize, residual: f64, lo: f64, hi: f64 },

    #[error("construction failed: {0}")]
    ConstructionFailed(String),

    #[error("no sign change of the key-rate bound on [{lo}, {hi}]")]
    NoThreshold { lo: f64, hi: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
