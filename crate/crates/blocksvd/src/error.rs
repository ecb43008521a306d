use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("memory budget exceeded by block {block}: needs {needed} bytes, {available} available")]
    MemoryBudget {
        block: String,
        needed: usize,
        available: usize,
    },

    #[error("zero sub-vector: no Householder reflector exists")]
    ZeroColumn,

    #[error("{what} did not converge: residual {residual:e}")]
    Convergence { what: String, residual: f64 },

    #[error("rank deficiency: {0}")]
    Rank(String),

    #[error("matrix is not symmetric: max asymmetry {0:e}")]
    Symmetry(f64),

    #[error("input columns are not orthonormal: max deviation {0:e}")]
    Orthogonality(f64),

    #[error("degenerate cut: fraction {fraction} needs all {n_cols} columns")]
    DegenerateCut { fraction: f64, n_cols: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
