use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AfpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AfpError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("validation error ({subject}): {message}")]
    Validation { subject: String, message: String },

    #[error("zero vector ({subject}): norm below 1e-12")]
    ZeroVector { subject: String },

    #[error("{name} = {value} is outside {expected}")]
    Range {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("adaptive threshold needs at least one pairwise distance")]
    InsufficientSamples,

    #[error("shape error: {0}")]
    Shape(String),

    #[error("no representative frames to assemble")]
    EmptySelection,

    #[error("invalid prompt input: {0}")]
    InvalidPrompt(String),

    #[error("graph service transport error: {0}")]
    Transport(String),

    #[error("graph service reply is not a graph document: {0}")]
    MalformedResponse(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<AfpError>,
    },
}

impl AfpError {
    pub(crate) fn validation(subject: impl Into<String>, message: impl Into<String>) -> Self {
        AfpError::Validation {
            subject: subject.into(),
            message: message.into(),
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        AfpError::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        AfpError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, with pipeline stage wrappers removed.
    pub fn root(&self) -> &AfpError {
        match self {
            AfpError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(AfpError::Range {
            name,
            value,
            expected: "[0, 1]",
        })
    }
}
