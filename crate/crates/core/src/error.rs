use thiserror::Error;

use crate::checkpoint::CheckpointError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("constraint group `{0}` is already registered")]
    DuplicateGroup(String),

    #[error("constraint group `{0}` is not registered")]
    UnknownGroup(String),

    #[error("invalid constraint group `{group}`: {reason}")]
    InvalidGroup { group: String, reason: String },

    #[error("constraint groups cannot be registered after the first roll")]
    ProblemSealed,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// A problem evaluation produced an invalid state. `group` names the
    /// offending constraint group when the failure is attributable to one.
    #[error("evaluation failed{}: {message}", group.as_ref().map(|g| format!(" in group `{g}`")).unwrap_or_default())]
    Evaluation {
        group: Option<String>,
        message: String,
        non_finite: bool,
    },

    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("duplicate index {0}")]
    DuplicateIndex(usize),

    #[error("penalty coefficient must be strictly positive and finite, got {0}")]
    NonPositivePenalty(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("KKT system is singular")]
    SingularKkt,

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn evaluation(group: Option<&str>, message: impl Into<String>) -> Self {
        Error::Evaluation {
            group: group.map(str::to_owned),
            message: message.into(),
            non_finite: false,
        }
    }

    pub(crate) fn non_finite_evaluation(group: Option<&str>, message: impl Into<String>) -> Self {
        Error::Evaluation {
            group: group.map(str::to_owned),
            message: message.into(),
            non_finite: true,
        }
    }

    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    /// True when the error signals a numerical breakdown (NaN/inf) rather
    /// than a configuration or I/O problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_) | Error::Evaluation { non_finite: true, .. }
        )
    }
}
