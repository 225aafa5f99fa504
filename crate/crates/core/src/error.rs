use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("SVD did not converge within {sweeps} sweeps (off-diagonal ratio {residual:e})")]
    ConvergenceFailure { sweeps: usize, residual: f64 },

    #[error("vector has zero norm")]
    ZeroVector,

    #[error("largest-magnitude entry is zero")]
    ZeroLeader,

    #[error("PQ-index requires 0 < p < q (got p = {p}, q = {q})")]
    BadOrders { p: f64, q: f64 },

    #[error("spread is 1 at layer {layer:?}: the k-th dominant term is zero, choose a smaller k")]
    DegenerateSpread { layer: Option<usize> },

    #[error("layer is not square ({rows}x{cols}); use the permissive shape policy to extend")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has zero Frobenius norm")]
    ZeroMatrix,

    #[error("invalid retained count k = {k} (must be in 1..={max})")]
    BadK { k: usize, max: usize },

    #[error("epsilon grid is empty")]
    EmptyGrid,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("task is not binary: {0}")]
    NonBinaryLabels(String),

    #[error("invalid dataset spec: {0}")]
    BadSpec(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("numerical failure: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by unreadable or malformed files.
    pub fn is_io_or_format(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Format(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(std::io::Error::other(e.to_string()))
        } else {
            Error::Format(e.to_string())
        }
    }
}
