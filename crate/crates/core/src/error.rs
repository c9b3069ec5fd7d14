use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Schema-level parse failure; `field` is the JSON path of the first offending value.
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },

    /// Structurally valid input that violates a domain invariant.
    #[error("{field}: {message}")]
    Validation { field: String, message: String },

    #[error("input too short: {0}")]
    TooShort(String),

    #[error("sampling rate {fps} Hz cannot represent band up to {high} Hz")]
    Nyquist { fps: f64, high: f64 },

    #[error("empty frequency band: {0}")]
    EmptyBand(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("non-finite objective at iteration {iteration}: {detail}")]
    NonFinite { iteration: usize, detail: String },

    /// Too little usable signal remains after motion excision.
    #[error("unrecoverable clip: {reason} (kept fraction {kept_fraction:.3})")]
    Unrecoverable { reason: String, kept_fraction: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Wraps a module error with the pipeline stage that produced it.
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
