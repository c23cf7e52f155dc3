//! Tab-separated ASCII to [`DecodedRecord`] decoding.
//!
//! Two decoders share one contract:
//!
//! - [`ScalarDecoder`] consumes one byte per step. It is the reference.
//! - [`GroupDecoder`] consumes four bytes per step, dispatching on the
//!   delimiter mask of the group (16 cases) and carrying the partially
//!   accumulated field across groups.
//!
//! Both are streaming: input may be fed in arbitrary chunks and the decoder
//! state (register, sign flag, column, row) carries across calls. A row is
//! emitted when its terminating `\n` is seen; a final row without `\n` is
//! flushed by [`Decode::finish`].
//!
//! Field grammar:
//!
//! | column | accepted text | value |
//! |---|---|---|
//! | label, dense | empty, or optional `-` then `0-9` digits | two's complement `i32`, magnitude ≤ 2³¹−1 |
//! | sparse | empty, or 1–8 of `0-9a-f` | `u32` |
//!
//! Empty fields decode to 0. A lone `-` also decodes to 0. Any other byte
//! (uppercase hex, `\r`, spaces, ...) is [`DecodeError::InvalidByte`].
//! Errors are sticky: once a decoder fails, every later call returns the
//! same error.

use alloc::vec::Vec;
use core::fmt;

use crate::schema::DecodedRecord;

mod group;
mod scalar;

pub use group::GroupDecoder;
pub use scalar::ScalarDecoder;

/// Lexical class of one input byte.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ByteToken {
    Tab,
    Newline,
    Minus,
    /// `0`–`9`, carrying its value.
    Digit(u8),
    /// `a`–`f`, carrying its value 10–15.
    HexLetter(u8),
    Invalid,
}

impl ByteToken {
    #[inline]
    pub const fn is_delimiter(self) -> bool {
        matches!(self, ByteToken::Tab | ByteToken::Newline)
    }

    /// 4-bit value for digits and hex letters.
    #[inline]
    pub const fn nibble(self) -> Option<u8> {
        match self {
            ByteToken::Digit(n) | ByteToken::HexLetter(n) => Some(n),
            _ => None,
        }
    }
}

const fn build_tokens() -> [ByteToken; 256] {
    let mut t = [ByteToken::Invalid; 256];
    t[b'\t' as usize] = ByteToken::Tab;
    t[b'\n' as usize] = ByteToken::Newline;
    t[b'-' as usize] = ByteToken::Minus;
    let mut i = 0u8;
    while i < 10 {
        t[(b'0' + i) as usize] = ByteToken::Digit(i);
        i += 1;
    }
    let mut i = 0u8;
    while i < 6 {
        t[(b'a' + i) as usize] = ByteToken::HexLetter(10 + i);
        i += 1;
    }
    t
}

pub(crate) static TOKENS: [ByteToken; 256] = build_tokens();

/// Total byte classifier.
#[inline]
pub fn classify_byte(b: u8) -> ByteToken {
    TOKENS[b as usize]
}

/// Decoding failure. `row` and `col` are zero-based; `row` counts rows from
/// the start of the stream the decoder was fed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecodeError {
    InvalidByte { row: u64, col: usize, byte: u8 },
    /// Dense magnitude above 2³¹−1, or more than 8 hex digits.
    FieldOverflow { row: u64, col: usize },
    /// Row with other than 40 fields. `fields` is the count when the problem
    /// was detected: the actual count for short rows, 41 for long ones.
    Arity { row: u64, fields: usize },
}

impl DecodeError {
    pub fn row(&self) -> u64 {
        match *self {
            DecodeError::InvalidByte { row, .. }
            | DecodeError::FieldOverflow { row, .. }
            | DecodeError::Arity { row, .. } => row,
        }
    }

    /// Shifts the row index, for decoders that started mid-dataset.
    pub fn offset_rows(self, base: u64) -> Self {
        match self {
            DecodeError::InvalidByte { row, col, byte } => DecodeError::InvalidByte {
                row: row + base,
                col,
                byte,
            },
            DecodeError::FieldOverflow { row, col } => DecodeError::FieldOverflow {
                row: row + base,
                col,
            },
            DecodeError::Arity { row, fields } => DecodeError::Arity {
                row: row + base,
                fields,
            },
        }
    }
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DecodeError::InvalidByte { row, col, byte } => {
                write!(f, "row {row}, column {col}: invalid byte 0x{byte:02x}")
            }
            DecodeError::FieldOverflow { row, col } => {
                write!(f, "row {row}, column {col}: value does not fit in 32 bits")
            }
            DecodeError::Arity { row, fields } if fields > crate::N_COLUMNS => {
                write!(f, "row {row}: more than {} fields", crate::N_COLUMNS)
            }
            DecodeError::Arity { row, fields } => {
                write!(f, "row {row}: expected {} fields, found {fields}", crate::N_COLUMNS)
            }
        }
    }
}

impl core::error::Error for DecodeError {}

/// Streaming decoder interface.
pub trait Decode {
    /// Consumes `bytes`, calling `emit` for every completed row.
    fn feed<F: FnMut(DecodedRecord)>(&mut self, bytes: &[u8], emit: &mut F)
        -> Result<(), DecodeError>;

    /// Flushes a trailing row that lacks its `\n`.
    fn finish<F: FnMut(DecodedRecord)>(&mut self, emit: &mut F) -> Result<(), DecodeError>;

    /// Rows emitted so far.
    fn rows(&self) -> u64;
}

/// Either decoder, selected by group width.
#[derive(Clone, Debug)]
pub enum Decoder {
    Scalar(ScalarDecoder),
    Group(GroupDecoder),
}

impl Decoder {
    /// Width 1 gives the scalar decoder, anything else the 4-byte one.
    pub fn for_width(width: usize) -> Self {
        if width == 1 {
            Decoder::Scalar(ScalarDecoder::new())
        } else {
            Decoder::Group(GroupDecoder::new())
        }
    }
}

impl Decode for Decoder {
    #[inline]
    fn feed<F: FnMut(DecodedRecord)>(
        &mut self,
        bytes: &[u8],
        emit: &mut F,
    ) -> Result<(), DecodeError> {
        match self {
            Decoder::Scalar(d) => d.feed(bytes, emit),
            Decoder::Group(d) => d.feed(bytes, emit),
        }
    }

    fn finish<F: FnMut(DecodedRecord)>(&mut self, emit: &mut F) -> Result<(), DecodeError> {
        match self {
            Decoder::Scalar(d) => d.finish(emit),
            Decoder::Group(d) => d.finish(emit),
        }
    }

    fn rows(&self) -> u64 {
        match self {
            Decoder::Scalar(d) => d.rows(),
            Decoder::Group(d) => d.rows(),
        }
    }
}

/// Runs `decoder` over `chunks` and returns everything emitted plus the
/// error that stopped it, if any.
pub fn decode_chunks<D: Decode>(
    mut decoder: D,
    chunks: &[&[u8]],
) -> (Vec<DecodedRecord>, Option<DecodeError>) {
    let mut out = Vec::new();
    let mut push = |r| out.push(r);
    for chunk in chunks {
        if let Err(e) = decoder.feed(chunk, &mut push) {
            return (out, Some(e));
        }
    }
    let err = decoder.finish(&mut push).err();
    (out, err)
}

/// Decodes a whole buffer byte by byte.
pub fn decode_scalar(bytes: &[u8]) -> Result<Vec<DecodedRecord>, DecodeError> {
    match decode_chunks(ScalarDecoder::new(), &[bytes]) {
        (records, None) => Ok(records),
        (_, Some(e)) => Err(e),
    }
}

/// Decodes a whole buffer four bytes at a time.
pub fn decode_group(bytes: &[u8]) -> Result<Vec<DecodedRecord>, DecodeError> {
    match decode_chunks(GroupDecoder::new(), &[bytes]) {
        (records, None) => Ok(records),
        (_, Some(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests;
