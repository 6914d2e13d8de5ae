use thiserror::Error;

pub type Result<T> = std::result::Result<T, AutodiffError>;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },

    #[error("dimension must be at least 1 (got {rows}x{cols})")]
    ZeroDimension { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dropout rate {0} outside [0, 1)")]
    InvalidRate(f64),

    #[error("loss must be a scalar, node has {0} values")]
    NotScalar(usize),

    #[error("{0} requires a nonempty input")]
    Empty(&'static str),

    #[error("probability vector sums to {0}, not 1")]
    Unnormalized(f64),

    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),

    #[error("unknown parameter `{0}`")]
    UnknownParam(String),

    #[error("parameter container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
