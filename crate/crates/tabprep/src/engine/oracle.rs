//! Single-threaded reference: two plain scans with an insertion-ordered set
//! per column. Everything else is tested against this.

use indexmap::IndexSet;
use tabprep_core::codec::{self, BinaryHeader, RecordKind, HEADER_BYTES};
use tabprep_core::decoder::decode_scalar;
use tabprep_core::ops::{modulus, transform_dense};
use tabprep_core::{
    DecodedRecord, FormatError, InputEncoding, PipelineConfig, TransformedRecord, VocabError,
    N_SPARSE,
};

use crate::error::{Error, Result};
use crate::io::Dataset;

type OrderedSet = IndexSet<u32, hashbrown::DefaultHashBuilder>;

fn decode_all(src: &Dataset) -> Result<Vec<DecodedRecord>> {
    let bytes = src.bytes()?;
    match src.encoding() {
        InputEncoding::Utf8 => Ok(decode_scalar(&bytes)?),
        InputEncoding::Binary => {
            let header = BinaryHeader::decode_expecting(&bytes, RecordKind::Decoded)?;
            let records: Vec<_> = codec::records(&bytes[HEADER_BYTES..], 0)?
                .map(codec::unpack_decoded)
                .collect();
            if records.len() as u64 != header.row_count {
                return Err(FormatError::RowCountMismatch {
                    header: header.row_count,
                    actual: records.len() as u64,
                }
                .into());
            }
            Ok(records)
        }
    }
}

/// Per-column first-appearance orders of the post-modulus values.
pub fn reference_vocabularies(src: &Dataset, cfg: &PipelineConfig) -> Result<Vec<Vec<u32>>> {
    cfg.validate()?;
    let records = decode_all(src)?;
    Ok(first_pass(&records, cfg.modulus)
        .into_iter()
        .map(|s| s.into_iter().collect())
        .collect())
}

fn first_pass(records: &[DecodedRecord], m: u32) -> Vec<OrderedSet> {
    let mut sets: Vec<OrderedSet> = (0..N_SPARSE).map(|_| OrderedSet::default()).collect();
    for r in records {
        for (set, &v) in sets.iter_mut().zip(&r.sparse) {
            set.insert(modulus(v, m));
        }
    }
    sets
}

/// Ground-truth output for `src`.
pub fn reference_oracle(src: &Dataset, cfg: &PipelineConfig) -> Result<Vec<TransformedRecord>> {
    cfg.validate()?;
    let m = cfg.modulus;
    let sets = first_pass(&decode_all(src)?, m);

    let second = decode_all(src)?;
    let mut out = Vec::with_capacity(second.len());
    for (row, r) in second.iter().enumerate() {
        let mut t = TransformedRecord {
            label: r.label,
            ..Default::default()
        };
        for (d, &x) in t.dense.iter_mut().zip(&r.dense) {
            *d = transform_dense(x, cfg.apply_log);
        }
        for c in 0..N_SPARSE {
            let v = modulus(r.sparse[c], m);
            t.sparse[c] = sets[c].get_index_of(&v).ok_or(Error::Vocab {
                row: row as u64,
                column: c,
                source: VocabError::MissingEntry { value: v },
            })? as u32;
        }
        out.push(t);
    }
    Ok(out)
}
