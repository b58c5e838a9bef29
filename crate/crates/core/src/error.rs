use thiserror::Error;

pub type Result<T> = std::result::Result<T, RoqError>;

#[derive(Debug, Error)]
pub enum RoqError {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    Dimension {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("singular system: pivot {index} has magnitude {magnitude:e}")]
    Singular { index: usize, magnitude: f64 },

    /// Iterative method hit its cap; carries the last estimate.
    #[error("{method} did not converge after {iterations} iterations (last estimate {estimate:e})")]
    Convergence {
        method: &'static str,
        iterations: usize,
        estimate: f64,
    },

    #[error("Gram-Schmidt breakdown: residual norm {residual:e} below threshold {threshold:e}")]
    LinearDependence { residual: f64, threshold: f64 },

    #[error("training space degenerate after {basis_size} basis vectors (greedy error {greedy_error:e})")]
    DegenerateTraining { basis_size: usize, greedy_error: f64 },

    #[error("function {index} has zero discrete norm")]
    DegenerateFunction { index: usize },

    #[error("product of functions {i} and {j} has zero discrete norm")]
    DegenerateProduct { i: usize, j: usize },

    #[error("DEIM columns dependent at step {step}: residual maximum {residual:e}")]
    DependentColumns { step: usize, residual: f64 },

    #[error("resampling grid cannot resolve the product basis: {0}")]
    ResolutionInsufficient(String),

    #[error("refusing {columns} training columns (limit {limit}); pass an explicit override")]
    MemoryGuard { columns: usize, limit: usize },

    #[error("exponential fit rejected: {0}")]
    DegenerateDecay(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<RoqError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RoqError {
    pub fn context(self, context: impl Into<String>) -> Self {
        RoqError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(RoqError::Dimension {
            expected,
            actual,
            context,
        })
    }
}
