use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    /// A library failure, tagged with the pipeline stage it happened in.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: gensim::Error,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), source }
    }

    /// 2 for configuration problems, 3 for numeric failures, 4 for IO.
    pub fn exit_code(&self) -> i32 {
        use gensim::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Stage { source, .. } => match source {
                E::Io { .. } | E::Checkpoint(_) => 4,
                E::Invalid { .. } | E::Precondition(_) | E::Parse { .. } | E::DimensionMismatch { .. } => 2,
                _ => 3,
            },
        }
    }
}

/// Attaches a stage name to library errors.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageExt<T> for gensim::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
