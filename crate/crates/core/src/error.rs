use std::path::PathBuf;

/// Errors raised by model construction, factorization, estimation and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid neighborhood coefficients: {0}")]
    Coefficients(String),

    #[error("boundary covariance is malformed: {0}")]
    BoundaryCovariance(String),

    #[error("matrix is not positive definite (first non-positive pivot at index {index})")]
    NotPositiveDefinite { index: usize },

    #[error("stage {stage}: Schur complement is not positive definite (pivot {pivot})")]
    StageNotPositiveDefinite { stage: usize, pivot: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("problem too large for dense oracle: {size} > {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("block-tridiagonal envelope violated at ({row}, {col}): {value}")]
    Envelope { row: usize, col: usize, value: f64 },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), msg: msg.into() }
    }
}
