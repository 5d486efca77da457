use thiserror::Error;

use crate::net::ParamVector;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A sampler gave up, e.g. a rejection loop hit its attempt limit.
    #[error("sampling failed at stage `{stage}`: {reason}")]
    Sampling { stage: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Both marginal likelihood estimates of a similarity ratio are zero.
    #[error("degenerate density: marginal likelihood estimate vanished")]
    DegenerateDensity,

    #[error("the process does not expose a likelihood")]
    MissingLikelihood,

    #[error("could not construct {what} within {attempts} attempts")]
    ConstructionFailure { what: String, attempts: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("activation cache does not match the parameters passed to backward")]
    StaleCache,

    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("parse error at offset {offset}: {reason}")]
    Parse { offset: usize, reason: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// Training produced a non-finite loss; `last_good` holds the parameters
    /// from the end of the last completed epoch.
    #[error("training diverged in epoch {epoch}")]
    Diverged { epoch: usize, last_good: Box<ParamVector> },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid { field, reason: reason.into() }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// True for failures caused by arithmetic rather than input or IO.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::Diverged { .. } | Error::DegenerateDensity
        )
    }
}

pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
