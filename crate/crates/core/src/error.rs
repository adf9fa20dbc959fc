//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid coefficient set: {0}")]
    InvalidCoefficients(String),

    #[error("quadrature failed near {endpoint}: {reason}")]
    Quadrature { endpoint: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mesh construction: {0}")]
    Mesh(String),

    #[error("operator assembly: {0}")]
    Assembly(String),

    #[error("eigensolver did not converge after {iterations} iterations (last increment {last_increment:.3e})")]
    NoConvergence {
        iterations: usize,
        last_increment: f64,
    },

    #[error("converged eigenvector has a negative component at node {node} (x = {x:.6e}); discretization too coarse")]
    NegativeEigenvector { node: usize, x: f64 },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
