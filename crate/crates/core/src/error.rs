use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("tape already replayed")]
    TapeConsumed,

    #[error("optimizer diverged: non-finite gradient at index {index}")]
    Diverged { index: usize },

    #[error("training diverged ({context})")]
    TrainingDiverged { context: String },

    #[error("checkpoint manifests differ: {0}")]
    ManifestMismatch(String),

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing prerequisite stage `{stage}`: {detail}")]
    MissingStage { stage: String, detail: String },

    #[error("push rejected: step {step} is not a render step for interval {interval}")]
    NotRenderStep { step: u64, interval: u64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
