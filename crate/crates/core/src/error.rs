use thiserror::Error;

/// Errors raised by the sweeping toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem data at `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },
    #[error("initial state violates constraint {index}: <x*_{index}, x0 - u0> = {value:.3e} > 0")]
    InfeasibleStart { index: usize, value: f64 },
    #[error("x - u lies outside C (constraint {index} violated by {excess:.3e}); F is empty there")]
    EmptyImage { index: usize, excess: f64 },
    #[error("reference infeasible at mesh nodes: {0}")]
    ReferenceInfeasible(String),
    #[error("step count must be at least 1, got {0}")]
    StepCount(usize),
    #[error("problem too large for brute force: {0}")]
    TooLarge(String),
    #[error("active generators are linearly dependent (rank {rank} < {count})")]
    RankDeficient { rank: usize, count: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("solver did not converge after {iterations} iterations (constraint residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("interior assumption fails at node {node}: x = {value}")]
    Interiority { node: usize, value: f64 },
    #[error("perturbation is not smooth; use the Euler-Lagrange checker instead")]
    NonSmooth,
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
