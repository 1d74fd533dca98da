use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("offset {offset} is beyond the text length {len}")]
    Range { offset: usize, len: usize },

    #[error("invalid document `{id}`: {message}")]
    InvalidDocument { id: String, message: String },

    #[error("malformed tagged text at character {position}: {message}")]
    MalformedTags { position: usize, message: String },

    #[error("document `{doc_id}`: {message} (character offset {offset})")]
    Chunking {
        doc_id: String,
        offset: usize,
        message: String,
    },

    #[error("invalid split: {0}")]
    Split(String),

    #[error("duplicate document id `{0}` after merging")]
    DuplicateId(String),

    #[error("document `{doc_id}`: gold has {gold} tags but prediction has {predicted}")]
    LengthMismatch {
        doc_id: String,
        gold: usize,
        predicted: usize,
    },

    #[error("invalid template: {0}")]
    Template(String),

    #[error("backend error: {0}")]
    Backend(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
