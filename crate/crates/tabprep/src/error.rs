use std::io;

use tabprep_core::wire::{ErrorCode, WireError};
use tabprep_core::{ConfigError, DecodeError, FormatError, VocabError};

use crate::engine::MergeError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("decode error: {0}")]
    Decode(#[from] DecodeError),
    #[error("row {row}, sparse column {column}: {source}")]
    Vocab {
        row: u64,
        column: usize,
        #[source]
        source: VocabError,
    },
    #[error("binary format: {0}")]
    Format(#[from] FormatError),
    #[error("wire format: {0}")]
    Wire(#[from] WireError),
    #[error("sub-vocabulary merge: {0}")]
    Merge(#[from] MergeError),
    #[error("second pass saw {pass2} rows, first pass saw {pass1}")]
    PassMismatch { pass1: u64, pass2: u64 },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("server reported {code:?}{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Remote {
        code: ErrorCode,
        row: Option<u64>,
        message: String,
    },
    /// A pipeline stage stopped because a neighbouring stage went away; the
    /// neighbour's own error is the interesting one.
    #[error("pipeline stage disconnected: {0}")]
    Disconnected(&'static str),
}

impl Error {
    /// Input row the error is attributed to, if any.
    pub fn row(&self) -> Option<u64> {
        match self {
            Error::Decode(e) => Some(e.row()),
            Error::Vocab { row, .. } => Some(*row),
            Error::Format(FormatError::ShortRead { record }) if *record != u64::MAX => {
                Some(*record)
            }
            Error::Remote { row, .. } => *row,
            _ => None,
        }
    }

    /// Picks the error to report when several pipeline stages failed: real
    /// failures beat disconnects, and among real failures the earliest row
    /// wins.
    pub(crate) fn first_of(errors: impl IntoIterator<Item = Error>) -> Option<Error> {
        errors.into_iter().min_by_key(|e| match e {
            Error::Disconnected(_) => (2, u64::MAX),
            e => match e.row() {
                Some(r) => (0, r),
                None => (1, 0),
            },
        })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
