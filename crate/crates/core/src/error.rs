use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("non-finite state at time step {step}")]
    Overflow { step: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("activation not differentiable at the operating point: {0}")]
    NonDifferentiable(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("R² undefined: target channel {channel} has zero variance")]
    UndefinedR2 { channel: usize },

    #[error("unsupported activation: {0}")]
    UnsupportedActivation(String),

    #[error("bias calibration did not converge; achieved fractions {fractions:?}")]
    Calibration { fractions: Vec<f64> },

    #[error("degenerate system: clean output power is zero")]
    DegenerateOutput,

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("validation split is empty")]
    EmptyValidation,

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by numerics rather than by caller input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::Overflow { .. }
                | Error::NonConvergence { .. }
                | Error::Singular(_)
                | Error::Calibration { .. }
                | Error::DegenerateOutput
                | Error::Divergence { .. }
        )
    }
}

impl Error {
    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::File { path: path.display().to_string(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
