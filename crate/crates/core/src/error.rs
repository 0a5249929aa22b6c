use thiserror::Error;

/// Errors produced by the alignment library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("cannot center a matrix with a single row")]
    DegenerateCentering,

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("covariance factor `{factor}` is singular or not positive definite")]
    SingularCovariance { factor: &'static str },

    #[error(
        "two-stage covariance estimate does not exist: need N >= m/n + 1, \
         got N = {subjects}, n = {rows}, m = {cols} (requires N >= {required:.3})"
    )]
    ExistenceCondition {
        subjects: usize,
        rows: usize,
        cols: usize,
        required: f64,
    },

    #[error("degenerate problem: trace of singular values is {0:e}, cannot estimate scale")]
    DegenerateScale(f64),

    #[error("need at least {required} subjects, got {got}")]
    InsufficientSubjects { required: usize, got: usize },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
