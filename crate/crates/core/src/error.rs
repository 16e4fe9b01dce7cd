use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at node {node:?}")]
    NonFinite { node: Vec<usize>, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("CFL condition violated: dt = {dt:e} exceeds the admissible {admissible:e}")]
    Cfl { dt: f64, admissible: f64 },

    #[error("time step condition violated: {0}")]
    StepCondition(String),

    #[error("dense operator of dimension {dim} exceeds the limit {limit}")]
    TooLarge { dim: usize, limit: usize },

    #[error("missing required field `{0}`")]
    MissingField(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
