use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("invalid closure: {0}")]
    Closure(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("hypothesis ({name}) violated: {detail}")]
    Hypothesis { name: String, detail: String },
    #[error("eigensolver did not converge (relative residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("operation requires a complete spectral decomposition")]
    DecompositionIncomplete,
    #[error("spectral identity mismatch: {0}")]
    Identity(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("linear solve failed: {0}")]
    Linear(String),
    #[error("newton iteration exceeded {iterations} steps (residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("iteration converged to the zero state")]
    ConvergedToZero,
    #[error("every seed converged into a deflated orbit ({attempts} attempts)")]
    DeflatedOrbit { attempts: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the nonlinear solver itself.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::MaxIterations { .. }
                | Error::ConvergedToZero
                | Error::DeflatedOrbit { .. }
                | Error::Linear(_)
                | Error::NoConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
