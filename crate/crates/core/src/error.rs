//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported image extension: {}", .0.display())]
    UnsupportedFormat(PathBuf),

    #[error("no sidecar transcript for {}: expected {}", image.display(), expected.display())]
    MissingSidecar { image: PathBuf, expected: PathBuf },

    #[error("ocr backend error: {0}")]
    OcrHttp(String),

    #[error("monthly ocr quota of {quota} calls exhausted")]
    QuotaExceeded { quota: u64 },

    #[error("duplicate document id {id:?}: {} and {}", first.display(), second.display())]
    DuplicateDocId {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },

    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("taxonomy contains a hypernym cycle through {0:?}")]
    CyclicTaxonomy(String),

    #[error("synset {child:?} lists unknown parent {parent:?}")]
    DanglingParent { child: String, parent: String },

    #[error("unknown synset id {0:?}")]
    UnknownSynset(String),

    #[error("matrix has no nonzero entries")]
    ZeroMatrix,

    #[error("embedding provider error: {0}")]
    EmbedHttp(String),

    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("preprocessing options mismatch: {0}")]
    OptionsMismatch(String),

    #[error("unknown algorithm {0:?} (expected jaccard, cosine, tfidf, lsa, embed or wordnet)")]
    UnknownAlgorithm(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Wraps an I/O error with the path it happened on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
