use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("search budget exhausted: {0}")]
    Budget(String),
    #[error("barrier construction failed: {0}")]
    Barrier(String),
    #[error("relaxation diverged: {0}")]
    Divergence(String),
    #[error("stencil of node {node:?} leaves the computable band")]
    Stencil { node: [usize; 3] },
}

pub type Result<T> = std::result::Result<T, Error>;
