//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, DeidError>;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum DeidError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file} line {line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("span ({start},{end}) out of bounds for text of length {len} in {doc}")]
    SpanOutOfBounds {
        doc: String,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("overlapping spans ({a_start},{a_end}) and ({b_start},{b_end}) in {doc}")]
    SpanOverlap {
        doc: String,
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },

    #[error("span ({start},{end},{subcategory}) does not align with token boundaries")]
    Misalignment {
        start: usize,
        end: usize,
        subcategory: String,
    },

    #[error("document {0} has no tokens; run pre-processing first")]
    NotPreprocessed(String),

    #[error("unknown template set `{0}`")]
    UnknownTemplateSet(String),

    #[error("unknown category set `{0}`")]
    UnknownCategorySet(String),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty corpus")]
    EmptyCorpus,
}

impl DeidError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        DeidError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(file: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        DeidError::Parse {
            file: file.into(),
            line,
            msg: msg.into(),
        }
    }
}
