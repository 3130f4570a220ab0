use crate::C64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is singular at pivot {pivot}; perturb the shift")]
    Singular { pivot: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("solution collapsed to a spatially constant state: equilibrium, not wave train")]
    Equilibrium,

    #[error("time evolution relaxed to a homogeneous state; {0}")]
    Decayed(String),

    #[error("spatial spectral gap is empty at lambda = {0}")]
    EmptyGap(C64),

    #[error("spatial eigenvalue labels collide between lambda = {from} and lambda = {to}")]
    LabelCollision { from: C64, to: C64 },

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
