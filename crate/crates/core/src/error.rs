//! Error type shared by all toolkit modules.

use std::path::PathBuf;

/// Errors produced while loading inputs or running pipeline operations.
#[derive(Debug, thiserror::Error)]
pub enum KpError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no documents in corpus {path}")]
    EmptyCorpus { path: PathBuf },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("prediction doc ids not in corpus: {0:?}")]
    UnknownDocIds(Vec<String>),

    #[error("no negatives available for document {doc_id}")]
    NoNegatives { doc_id: String },

    #[error("keyphrase {phrase:?} of document {doc_id} is not a graph node")]
    MissingGraphNode { doc_id: String, phrase: String },
}

pub type Result<T> = std::result::Result<T, KpError>;

impl KpError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KpError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        KpError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
