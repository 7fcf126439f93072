use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum LdgError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(
        "linear solver failed after {iterations} iterations (relative residual {residual:.3e})"
    )]
    LinearSolver { iterations: usize, residual: f64 },

    #[error(
        "Newton iteration did not converge in {iterations} iterations (residual {residual:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("line search stagnated at iteration {iteration} (residual {residual:.3e})")]
    Stagnation {
        iteration: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LdgError>;
