//! Fixed-width record layouts and the binary file header.
//!
//! Records are 40 little-endian 32-bit fields, 160 bytes:
//!
//! | offset | decoded | transformed |
//! |---|---|---|
//! | 0 | label `i32` | label `i32` |
//! | 4..56 | 13 × dense `i32` | 13 × dense `f32` |
//! | 56..160 | 26 × sparse `u32` | 26 × vocabulary id `u32` |
//!
//! Files start with a 24-byte [`BinaryHeader`].

use core::fmt;

use crate::schema::{DecodedRecord, TransformedRecord, N_DENSE, N_SPARSE, RECORD_BYTES};

pub const HEADER_BYTES: usize = 24;
pub const FILE_MAGIC: [u8; 4] = *b"PBIN";
pub const FILE_VERSION: u16 = 1;

const DENSE_OFF: usize = 4;
const SPARSE_OFF: usize = DENSE_OFF + N_DENSE * 4;

#[inline]
fn put(buf: &mut [u8], off: usize, v: u32) {
    buf[off..off + 4].copy_from_slice(&v.to_le_bytes());
}

#[inline]
fn get(buf: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([buf[off], buf[off + 1], buf[off + 2], buf[off + 3]])
}

pub fn pack_decoded_into(r: &DecodedRecord, out: &mut [u8; RECORD_BYTES]) {
    put(out, 0, r.label as u32);
    for (i, &d) in r.dense.iter().enumerate() {
        put(out, DENSE_OFF + 4 * i, d as u32);
    }
    for (i, &s) in r.sparse.iter().enumerate() {
        put(out, SPARSE_OFF + 4 * i, s);
    }
}

pub fn pack_decoded(r: &DecodedRecord) -> [u8; RECORD_BYTES] {
    let mut out = [0u8; RECORD_BYTES];
    pack_decoded_into(r, &mut out);
    out
}

pub fn unpack_decoded(b: &[u8; RECORD_BYTES]) -> DecodedRecord {
    let mut r = DecodedRecord {
        label: get(b, 0) as i32,
        ..Default::default()
    };
    for (i, d) in r.dense.iter_mut().enumerate() {
        *d = get(b, DENSE_OFF + 4 * i) as i32;
    }
    for (i, s) in r.sparse.iter_mut().enumerate() {
        *s = get(b, SPARSE_OFF + 4 * i);
    }
    r
}

pub fn pack_transformed_into(r: &TransformedRecord, out: &mut [u8; RECORD_BYTES]) {
    put(out, 0, r.label as u32);
    for (i, &d) in r.dense.iter().enumerate() {
        put(out, DENSE_OFF + 4 * i, d.to_bits());
    }
    for (i, &s) in r.sparse.iter().enumerate() {
        put(out, SPARSE_OFF + 4 * i, s);
    }
}

pub fn pack_transformed(r: &TransformedRecord) -> [u8; RECORD_BYTES] {
    let mut out = [0u8; RECORD_BYTES];
    pack_transformed_into(r, &mut out);
    out
}

pub fn unpack_transformed(b: &[u8; RECORD_BYTES]) -> TransformedRecord {
    let mut r = TransformedRecord {
        label: get(b, 0) as i32,
        ..Default::default()
    };
    for (i, d) in r.dense.iter_mut().enumerate() {
        *d = f32::from_bits(get(b, DENSE_OFF + 4 * i));
    }
    for (i, s) in r.sparse.iter_mut().enumerate() {
        *s = get(b, SPARSE_OFF + 4 * i);
    }
    r
}

/// Splits `bytes` into whole records; a partial tail is a short read at
/// record index `first_record + whole`.
pub fn records(
    bytes: &[u8],
    first_record: u64,
) -> Result<impl Iterator<Item = &[u8; RECORD_BYTES]>, FormatError> {
    let chunks = bytes.chunks_exact(RECORD_BYTES);
    if !chunks.remainder().is_empty() {
        return Err(FormatError::ShortRead {
            record: first_record + (bytes.len() / RECORD_BYTES) as u64,
        });
    }
    Ok(chunks.map(|c| c.try_into().unwrap()))
}

/// Reassembles 160-byte records from a byte stream cut at arbitrary
/// offsets.
#[derive(Clone, Debug)]
pub struct RecordReassembler {
    carry: [u8; RECORD_BYTES],
    carry_len: usize,
    records: u64,
}

impl Default for RecordReassembler {
    fn default() -> Self {
        Self::new()
    }
}

impl RecordReassembler {
    pub fn new() -> Self {
        RecordReassembler {
            carry: [0; RECORD_BYTES],
            carry_len: 0,
            records: 0,
        }
    }

    pub fn feed<F: FnMut(&[u8; RECORD_BYTES])>(&mut self, mut bytes: &[u8], mut emit: F) {
        if self.carry_len > 0 {
            let take = (RECORD_BYTES - self.carry_len).min(bytes.len());
            self.carry[self.carry_len..self.carry_len + take].copy_from_slice(&bytes[..take]);
            self.carry_len += take;
            bytes = &bytes[take..];
            if self.carry_len < RECORD_BYTES {
                return;
            }
            emit(&self.carry);
            self.records += 1;
            self.carry_len = 0;
        }
        let mut whole = bytes.chunks_exact(RECORD_BYTES);
        for rec in &mut whole {
            emit(rec.try_into().unwrap());
            self.records += 1;
        }
        let rest = whole.remainder();
        self.carry[..rest.len()].copy_from_slice(rest);
        self.carry_len = rest.len();
    }

    /// Records emitted so far, or a short read if a partial record remains.
    pub fn finish(&self) -> Result<u64, FormatError> {
        if self.carry_len > 0 {
            return Err(FormatError::ShortRead {
                record: self.records,
            });
        }
        Ok(self.records)
    }

    pub fn records(&self) -> u64 {
        self.records
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKind {
    Decoded = 0,
    Transformed = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatError {
    BadMagic,
    VersionMismatch { found: u16 },
    /// Header declares another column layout.
    SchemaMismatch { n_dense: u8, n_sparse: u8 },
    UnknownKind(u32),
    WrongKind { expected: RecordKind, found: RecordKind },
    /// Input ended inside the header (`record == u64::MAX`) or inside the
    /// given record.
    ShortRead { record: u64 },
    RowCountMismatch { header: u64, actual: u64 },
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FormatError::BadMagic => f.write_str("not a binary dataset (bad magic)"),
            FormatError::VersionMismatch { found } => {
                write!(f, "unsupported format version {found}, expected {FILE_VERSION}")
            }
            FormatError::SchemaMismatch { n_dense, n_sparse } => write!(
                f,
                "header declares {n_dense} dense / {n_sparse} sparse columns, expected {N_DENSE} / {N_SPARSE}"
            ),
            FormatError::UnknownKind(k) => write!(f, "unknown record kind {k}"),
            FormatError::WrongKind { expected, found } => {
                write!(f, "expected {expected:?} records, file holds {found:?}")
            }
            FormatError::ShortRead { record: u64::MAX } => f.write_str("truncated header"),
            FormatError::ShortRead { record } => write!(f, "input ends inside record {record}"),
            FormatError::RowCountMismatch { header, actual } => {
                write!(f, "header declares {header} rows, found {actual}")
            }
        }
    }
}

impl core::error::Error for FormatError {}

/// File header.
///
/// | offset | size | field |
/// |---|---|---|
/// | 0 | 4 | magic `"PBIN"` |
/// | 4 | 2 | version |
/// | 6 | 2 | reserved, zero |
/// | 8 | 8 | row count |
/// | 16 | 4 | kind (0 decoded, 1 transformed) |
/// | 20 | 1 | dense column count (13) |
/// | 21 | 1 | sparse column count (26) |
/// | 22 | 2 | reserved, zero |
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BinaryHeader {
    pub kind: RecordKind,
    pub row_count: u64,
}

impl BinaryHeader {
    pub fn new(kind: RecordKind, row_count: u64) -> Self {
        BinaryHeader { kind, row_count }
    }

    pub fn encode(&self) -> [u8; HEADER_BYTES] {
        let mut h = [0u8; HEADER_BYTES];
        h[0..4].copy_from_slice(&FILE_MAGIC);
        h[4..6].copy_from_slice(&FILE_VERSION.to_le_bytes());
        h[8..16].copy_from_slice(&self.row_count.to_le_bytes());
        h[16..20].copy_from_slice(&(self.kind as u32).to_le_bytes());
        h[20] = N_DENSE as u8;
        h[21] = N_SPARSE as u8;
        h
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < HEADER_BYTES {
            return Err(FormatError::ShortRead { record: u64::MAX });
        }
        if bytes[0..4] != FILE_MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FILE_VERSION {
            return Err(FormatError::VersionMismatch { found: version });
        }
        let (n_dense, n_sparse) = (bytes[20], bytes[21]);
        if n_dense as usize != N_DENSE || n_sparse as usize != N_SPARSE {
            return Err(FormatError::SchemaMismatch { n_dense, n_sparse });
        }
        let kind = match get(bytes, 16) {
            0 => RecordKind::Decoded,
            1 => RecordKind::Transformed,
            k => return Err(FormatError::UnknownKind(k)),
        };
        let row_count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        Ok(BinaryHeader { kind, row_count })
    }

    /// Decodes and checks the record kind.
    pub fn decode_expecting(bytes: &[u8], kind: RecordKind) -> Result<Self, FormatError> {
        let h = Self::decode(bytes)?;
        if h.kind != kind {
            return Err(FormatError::WrongKind {
                expected: kind,
                found: h.kind,
            });
        }
        Ok(h)
    }

    /// Total file size implied by the header.
    pub fn file_len(&self) -> u64 {
        HEADER_BYTES as u64 + self.row_count * RECORD_BYTES as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn decoded_layout() {
        assert_eq!(pack_decoded(&DecodedRecord::default()), [0u8; 160]);
        let r = DecodedRecord {
            label: 1,
            ..Default::default()
        };
        let b = pack_decoded(&r);
        assert_eq!(&b[..4], &[1, 0, 0, 0]);
        assert_eq!(unpack_decoded(&b), r);
        assert_eq!(unpack_decoded(&[0u8; 160]), DecodedRecord::default());
        let mut one = [0u8; 160];
        one[0] = 1;
        assert_eq!(unpack_decoded(&one).label, 1);

        let r = DecodedRecord {
            label: -1,
            dense: [-2; 13],
            sparse: [0xa1b2_c3d4; 26],
        };
        let b = pack_decoded(&r);
        assert_eq!(&b[0..4], &[0xff; 4]);
        assert_eq!(&b[4..8], &[0xfe, 0xff, 0xff, 0xff]);
        assert_eq!(&b[56..60], &[0xd4, 0xc3, 0xb2, 0xa1]);
    }

    #[test]
    fn transformed_layout() {
        let mut r = TransformedRecord::default();
        assert!(pack_transformed(&r)[4..56].iter().all(|&b| b == 0));
        r.sparse[0] = 2;
        let b = pack_transformed(&r);
        assert_eq!(&b[56..60], &[2, 0, 0, 0]);
        r.dense[0] = 1.0;
        let b = pack_transformed(&r);
        assert_eq!(&b[4..8], &1.0f32.to_le_bytes());
        assert_eq!(unpack_transformed(&b), r);
    }

    #[test]
    fn header_layout() {
        let h = BinaryHeader::new(RecordKind::Decoded, 3);
        let b = h.encode();
        assert_eq!(&b[..4], b"PBIN");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(&b[8..16], &[3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!((b[20], b[21]), (13, 26));
        assert_eq!(BinaryHeader::decode(&b), Ok(h));
        assert_eq!(h.file_len(), 24 + 3 * 160);

        let mut bad = b;
        bad[0] = b'X';
        assert_eq!(BinaryHeader::decode(&bad), Err(FormatError::BadMagic));
        let mut bad = b;
        bad[4] = 9;
        assert_eq!(
            BinaryHeader::decode(&bad),
            Err(FormatError::VersionMismatch { found: 9 })
        );
        let mut bad = b;
        bad[21] = 27;
        assert!(matches!(
            BinaryHeader::decode(&bad),
            Err(FormatError::SchemaMismatch { .. })
        ));
        assert_eq!(
            BinaryHeader::decode(&b[..10]),
            Err(FormatError::ShortRead { record: u64::MAX })
        );
        assert!(matches!(
            BinaryHeader::decode_expecting(&b, RecordKind::Transformed),
            Err(FormatError::WrongKind { .. })
        ));
    }

    #[test]
    fn record_splitting() {
        let bytes = [0u8; 480];
        assert_eq!(records(&bytes, 0).unwrap().count(), 3);
        assert_eq!(
            records(&bytes[..400], 5).err(),
            Some(FormatError::ShortRead { record: 7 })
        );
    }

    #[test]
    fn reassembler_handles_any_cut() {
        let recs: Vec<[u8; 160]> = (0..3u8).map(|i| [i; 160]).collect();
        let stream: Vec<u8> = recs.concat();
        for cut in [0, 1, 159, 160, 161, 300, 480] {
            let mut r = RecordReassembler::new();
            let mut out = Vec::new();
            r.feed(&stream[..cut], |b| out.push(*b));
            r.feed(&stream[cut..], |b| out.push(*b));
            assert_eq!(out, recs);
            assert_eq!(r.finish(), Ok(3));
        }
        let mut r = RecordReassembler::new();
        r.feed(&stream[..400], |_| ());
        assert_eq!(r.finish(), Err(FormatError::ShortRead { record: 2 }));
    }

    fn arb_decoded() -> impl Strategy<Value = DecodedRecord> {
        (any::<i32>(), any::<[i32; 13]>(), any::<[u32; 26]>())
            .prop_map(|(label, dense, sparse)| DecodedRecord { label, dense, sparse })
    }

    proptest! {
        #[test]
        fn decoded_round_trip(r in arb_decoded()) {
            let b = pack_decoded(&r);
            prop_assert_eq!(unpack_decoded(&b), r);
            prop_assert_eq!(pack_decoded(&unpack_decoded(&b)), b);
        }

        #[test]
        fn transformed_round_trip(bytes in proptest::collection::vec(any::<u8>(), 160)) {
            // Any bit pattern, NaNs included, survives unpack/pack.
            let b: [u8; 160] = bytes.try_into().unwrap();
            prop_assert_eq!(pack_transformed(&unpack_transformed(&b)), b);
        }
    }
}
