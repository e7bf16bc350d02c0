use thiserror::Error;

/// Errors produced by solvers, estimators and geometry routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("field node {node} at {lambda:?}: {source}")]
    NodeFailure {
        node: usize,
        lambda: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate metric at {lambda:?} (condition number {cond:.3e})")]
    DegenerateMetric { lambda: Vec<f64>, cond: f64 },

    #[error("point {lambda:?} outside grid bounds")]
    OutOfBounds { lambda: Vec<f64> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
