use thiserror::Error;

use crate::middleware::ComponentId;
use crate::time::SimTime;

pub type Result<T, E = DvcaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DvcaError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at `{path}`: {reason}")]
    Validation { path: String, reason: String },

    #[error("{component:?} publish at {t} precedes previous publish at {last}")]
    Order { component: ComponentId, t: SimTime, last: SimTime },

    #[error("index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },

    #[error("component {component:?} panicked at {t}: {message}")]
    SimPanic { component: ComponentId, t: SimTime, message: String },

    #[error("scenario passes under the original pipeline; nothing to attribute")]
    NoViolation,

    #[error("no single component substitution removes the violation")]
    Unattributable { outcomes: Vec<(String, bool)> },

    #[error("suffix predicate for {component:?} is not monotone (✓ after ✗ at states {at:?})")]
    MonotonicityViolation { component: ComponentId, at: Vec<usize> },

    #[error("no planning message violates the driving specification")]
    NoViolatingPlanningMessage,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DvcaError {
    pub fn validation(path: impl Into<String>, reason: impl Into<String>) -> Self {
        DvcaError::Validation { path: path.into(), reason: reason.into() }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        DvcaError::Io { path: path.as_ref().display().to_string(), source }
    }
}

impl From<serde_json::Error> for DvcaError {
    fn from(e: serde_json::Error) -> Self {
        DvcaError::Parse(e.to_string())
    }
}
