use thiserror::Error;

use crate::pde::SolveReport;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid problem data: {0}")]
    InvalidData(String),

    #[error("nonlinear solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        residual: f64,
        iterations: usize,
        report: Box<SolveReport>,
    },

    #[error("linear solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    LinearNonConvergence { residual: f64, iterations: usize },

    #[error("negative reaction coefficient at node {node}: {value:.3e}")]
    NegativeCoefficient { node: usize, value: f64 },

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("line search failed at iteration {iteration} (step {step:.3e})")]
    LineSearchFailure { iteration: usize, step: f64 },

    #[error("{0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
