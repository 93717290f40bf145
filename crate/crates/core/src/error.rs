use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the discovery engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
        /// Artifacts already written when the stage failed.
        manifest: Vec<PathBuf>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    /// True for errors caused by bad input or configuration rather than a
    /// failure during computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Usage(_) | Error::Validation(_) | Error::Ingest(_) | Error::Domain(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
