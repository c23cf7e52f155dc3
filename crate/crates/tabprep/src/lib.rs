//! Two-pass preprocessing of Criteo-shaped tabular data: a column-wise
//! pipelined engine, a row-wise baseline, file formats, a streaming network
//! service and the benchmark driver.
//!
//! The pure building blocks (decoders, vocabularies, record layouts, wire
//! framing) come from [`tabprep_core`] and are re-exported as [`core`].

pub use tabprep_core as core;

pub mod bench;
pub mod engine;
pub mod error;
pub mod gen;
pub mod io;
pub mod net;
pub mod verify;

pub use engine::{
    merge_subvocabs, reference_oracle, run_columnwise, run_rowwise_baseline, RunStats, SubVocab,
    VocabSet,
};
pub use error::{Error, Result};
pub use io::{read_source, Dataset, RecordSink, RecordSource};
