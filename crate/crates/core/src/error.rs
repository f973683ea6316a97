use std::io;
use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

use crate::diff::DiffError;
use crate::quad::IngestError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Ingest(#[from] IngestError),

    #[error(transparent)]
    Diff(#[from] DiffError),

    #[error("{origin}:{line}: {message}")]
    Manifest {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("vocabulary document {origin}: {message}")]
    VocabParse { origin: String, message: String },

    #[error("public suffix list: {0}")]
    Psl(String),

    #[error("cannot merge usage of {left} with usage of {right}")]
    UsageDateMismatch { left: NaiveDate, right: NaiveDate },

    #[error("vocabulary {0} has no terms to report on")]
    EmptyUniverse(String),

    #[error("invalid corpus spec: {}", .0.join("; "))]
    InvalidCorpusSpec(Vec<String>),

    #[error("configuration: {0}")]
    Config(String),

    #[error("archive: {0}")]
    Archive(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
