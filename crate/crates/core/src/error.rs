use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{taps} taps cannot satisfy the minimum separation with {pilots} pilots")]
    Separation { taps: usize, pilots: usize },

    #[error("unsupported problem size: {0}")]
    Unsupported(String),

    #[error("identifiability: {unknowns} unknowns exceed {measurements} measurements")]
    Identifiability {
        unknowns: usize,
        measurements: usize,
    },

    #[error("numerical breakdown at iteration {iteration}: {reason}")]
    Numerical { iteration: usize, reason: String },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("eigendecomposition did not converge for a {0}x{0} block")]
    Eigen(usize),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
