use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model document. `path` is the JSON key path of the offending value.
    #[error("model spec error at `{path}`: {message}")]
    Spec { path: String, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("constraint system C Q^-1 C^T is singular")]
    SingularConstraint,

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("Newton iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("mode search reached the iteration limit ({0})")]
    MaxIterations(usize),

    #[error("marginal is not unimodal; HPD interval would be a union of intervals")]
    Multimodal,

    #[error("fit was run without control.compute.config; no configurations stored")]
    ConfigNotStored,

    #[error("fit failed during {stage}: {message}")]
    FitFailed { stage: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid user input (bad model, data or graph files).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Spec { .. }
                | Error::Data(_)
                | Error::Graph(_)
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::DimensionMismatch { .. }
        )
    }
}
