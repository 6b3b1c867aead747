use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
///
/// Variants follow the failure classes of the individual stages so the CLI
/// can map them onto stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("layout error: {0}")]
    Layout(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric error in layer {layer}: {message}")]
    Numeric { layer: usize, message: String },

    #[error("checkpoint error ({field}): {message}")]
    Checkpoint { field: String, message: String },

    #[error("report error: {0}")]
    Report(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags an error with the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn checkpoint(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Checkpoint {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn numeric(layer: usize, message: impl Into<String>) -> Self {
        Error::Numeric {
            layer,
            message: message.into(),
        }
    }
}
