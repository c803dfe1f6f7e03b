use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("{what} is not Hermitian (max |A - A^dagger| = {deviation:.3e})")]
    NotHermitian { what: String, deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("order {order} is not supported: {reason}")]
    UnsupportedOrder { order: usize, reason: String },

    #[error("moment of order {0} is missing")]
    MissingOrder(usize),

    #[error("times must be strictly descending")]
    NonDescendingTimes,

    #[error("Hilbert space of dimension {dim} exceeds the limit {limit}")]
    Oversize { dim: usize, limit: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no retained singular values")]
    NoRetainedSingularValues,

    #[error("all generator orders vanish on the grid")]
    VanishingGenerator,

    #[error("singular map at t = {t}: {reason}")]
    SingularMap { t: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
