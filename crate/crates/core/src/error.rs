use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} is not supported (only n = 1 and n = 2)")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("weight is singular at {point:?}")]
    SingularPoint { point: Vec<f64> },

    #[error("point {point:?} lies outside the tabulated grid")]
    OutOfGrid { point: Vec<f64> },

    #[error("integrand is not locally integrable: singular exponent {exponent} <= -{dim}")]
    NotIntegrable { exponent: f64, dim: usize },

    #[error("kernel is singular at x = {x:?}, y = {y:?}")]
    Singular { x: Vec<f64>, y: Vec<f64> },

    #[error("quadrature did not converge: successive refinements {coarse} and {fine} differ by more than {limit}")]
    QuadratureDiverged { coarse: f64, fine: f64, limit: f64 },

    #[error("quadrature produced a non-finite value")]
    NonFinite,

    #[error("matrix {index} is not invertible (condition number {condition:e})")]
    SingularMatrix { index: usize, condition: f64 },

    #[error("difference A_{i} - A_{j} is not invertible (condition number {condition:e})")]
    SingularDifference { i: usize, j: usize, condition: f64 },

    #[error("atom profile degenerated after moment projection (residual ratio {ratio:e})")]
    DegenerateProfile { ratio: f64 },

    #[error("sample point {point:?} lies inside expanded ball {ball}")]
    MisclassifiedSample { point: Vec<f64>, ball: usize },

    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
