//! Allocation-only building blocks for a two-pass columnar preprocessing
//! pipeline over Criteo-shaped tabular data.
//!
//! Everything here is pure computation over byte slices and fixed-width
//! records, so the crate builds without `std`:
//!
//! - [`schema`]: column layout, the two record types and the pipeline config.
//! - [`decoder`]: byte-at-a-time and four-byte-group TSV decoders.
//! - [`ops`]: dense transforms, the sparse modulus and per-column vocabularies.
//! - [`codec`]: fixed 160-byte record layouts and the binary file header.
//! - [`wire`]: framing for the streaming network protocol.
//!
//! Threads, files and sockets live in the `tabprep` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod codec;
pub mod decoder;
pub mod ops;
pub mod schema;
pub mod wire;

pub use codec::{BinaryHeader, FormatError, RecordKind, RecordReassembler};
pub use decoder::{classify_byte, ByteToken, Decode, DecodeError, GroupDecoder, ScalarDecoder};
pub use ops::{Observation, VocabError, VocabTable};
pub use schema::{
    ColumnKind, ConfigError, DatasetSchema, DecodedRecord, InputEncoding, PipelineConfig,
    SpillMode, TransformedRecord, N_COLUMNS, N_DENSE, N_SPARSE, RECORD_BYTES,
};
