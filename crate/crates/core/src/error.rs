use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error families, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Parse,
    Validation,
    Numeric,
    Credential,
    Transport,
    Provider,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: line {line}: {message}")]
    Parse { file: String, line: u64, message: String },

    #[error("invalid JSON in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("graph has no nodes left after preprocessing")]
    EmptyGraph,

    #[error("cannot split graph: {0}")]
    Split(String),

    #[error("node index {index} out of range for graph with {len} nodes")]
    Index { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("mask selects no nodes")]
    EmptyMask,

    #[error("AUC is undefined when labels contain a single class")]
    UndefinedAuc,

    #[error("non-finite loss at epoch {epoch} during {stage}")]
    NonFinite { stage: &'static str, epoch: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing or rejected credential: set the {var} environment variable")]
    Credential { var: String },

    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("provider error: {0}")]
    Provider(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Parse { .. } | Error::Json { .. } => ErrorKind::Parse,
            Error::Validation(_)
            | Error::EmptyGraph
            | Error::Split(_)
            | Error::Index { .. }
            | Error::Shape(_)
            | Error::EmptyMask
            | Error::Config(_) => ErrorKind::Validation,
            Error::UndefinedAuc | Error::NonFinite { .. } => ErrorKind::Numeric,
            Error::Credential { .. } => ErrorKind::Credential,
            Error::Transport { .. } => ErrorKind::Transport,
            Error::Provider(_) => ErrorKind::Provider,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
