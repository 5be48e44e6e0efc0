use thiserror::Error;

use crate::model::SymmetricMatrix;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {left} vs {right} vertices")]
    DimensionMismatch { left: usize, right: usize },

    #[error("root check failed: |x - phi(x)| = {residual:e} at x = {root}")]
    ResidualRootCheck { root: f64, residual: f64 },

    #[error("constant equation has {0} roots; D_beta is only defined for a unique root")]
    MultipleRoots(usize),

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last: Box<SymmetricMatrix>,
    },

    #[error("regime precondition violated: {0}")]
    RegimeViolation(String),

    #[error("model is not an edge/triangle model: {0}")]
    NotTriangleModel(String),

    #[error("index set of size {size} exceeds the budget {budget}")]
    SizeLimit { size: u128, budget: u128 },

    #[error("two-block construction needs an even vertex count, got {0}")]
    OddN(usize),

    #[error("exact enumeration supports at most {max} vertices, got {n}")]
    TooLarge { n: usize, max: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
