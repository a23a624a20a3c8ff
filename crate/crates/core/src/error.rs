use std::path::PathBuf;

use thiserror::Error;

/// A single field or record failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct FieldError(String);

impl FieldError {
    pub fn new(msg: impl Into<String>) -> Self {
        FieldError(msg.into())
    }
}

/// Failure reading or writing the CSV intermediate representation.
#[derive(Debug, Error)]
pub enum IrError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: schema mismatch: expected columns [{expected}], found [{found}]")]
    SchemaMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}:{line}: malformed row: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("{path}: duplicate record {key}")]
    Duplicate { path: PathBuf, key: String },
}
