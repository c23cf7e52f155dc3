//! Streaming protocol encodings.
//!
//! A connection carries one session of two passes. Each pass starts with a
//! raw 24-byte [`SessionHeader`] from the client, followed by frames:
//!
//! ```text
//! frame := type:u8 length:u32 payload[length]      (length <= 1 MiB)
//! ```
//!
//! Client to server: `DATA` (opaque input bytes) ... `END`.
//! Server to client: after pass 1 `STATS`; after pass 2 `RESULT`... `STATS`;
//! `ERROR` at any point ends the session. All integers are little-endian.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::schema::{InputEncoding, N_SPARSE};

pub const MAX_PAYLOAD: usize = 1 << 20;
pub const FRAME_HEADER_BYTES: usize = 5;
pub const SESSION_HEADER_BYTES: usize = 24;
pub const SESSION_MAGIC: [u8; 4] = *b"PNET";
pub const PROTOCOL_VERSION: u16 = 1;
pub const STATS_BYTES: usize = 4 + 8 + 4 * N_SPARSE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    Data = 1,
    End = 2,
    Result = 3,
    Stats = 4,
    Error = 5,
}

impl FrameType {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => FrameType::Data,
            2 => FrameType::End,
            3 => FrameType::Result,
            4 => FrameType::Stats,
            5 => FrameType::Error,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireError {
    UnknownFrameType(u8),
    PayloadTooLarge(u32),
    BadMagic,
    VersionMismatch(u16),
    BadField(&'static str),
    ShortPayload { expected: usize, found: usize },
}

impl fmt::Display for WireError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WireError::UnknownFrameType(t) => write!(f, "unknown frame type {t}"),
            WireError::PayloadTooLarge(n) => {
                write!(f, "frame payload of {n} bytes exceeds {MAX_PAYLOAD}")
            }
            WireError::BadMagic => f.write_str("bad session magic"),
            WireError::VersionMismatch(v) => write!(f, "unsupported protocol version {v}"),
            WireError::BadField(name) => write!(f, "invalid session field {name}"),
            WireError::ShortPayload { expected, found } => {
                write!(f, "payload has {found} bytes, expected {expected}")
            }
        }
    }
}

impl core::error::Error for WireError {}

pub fn encode_frame_header(ty: FrameType, len: usize) -> [u8; FRAME_HEADER_BYTES] {
    assert!(len <= MAX_PAYLOAD, "frame payload too large");
    let mut h = [0u8; FRAME_HEADER_BYTES];
    h[0] = ty as u8;
    h[1..].copy_from_slice(&(len as u32).to_le_bytes());
    h
}

pub fn decode_frame_header(h: &[u8; FRAME_HEADER_BYTES]) -> Result<(FrameType, usize), WireError> {
    let ty = FrameType::from_code(h[0]).ok_or(WireError::UnknownFrameType(h[0]))?;
    let len = u32::from_le_bytes([h[1], h[2], h[3], h[4]]);
    if len as usize > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(len));
    }
    Ok((ty, len as usize))
}

/// Sent raw before the frames of each pass.
///
/// | offset | size | field |
/// |---|---|---|
/// | 0 | 4 | magic `"PNET"` |
/// | 4 | 2 | version |
/// | 6 | 1 | pass (1 or 2) |
/// | 7 | 1 | encoding (0 utf8, 1 binary) |
/// | 8 | 8 | session id |
/// | 16 | 4 | modulus |
/// | 20 | 1 | apply_log (0/1) |
/// | 21 | 3 | reserved, zero |
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SessionHeader {
    pub session_id: u64,
    pub pass: u8,
    pub encoding: InputEncoding,
    pub modulus: u32,
    pub apply_log: bool,
}

impl SessionHeader {
    pub fn encode(&self) -> [u8; SESSION_HEADER_BYTES] {
        let mut b = [0u8; SESSION_HEADER_BYTES];
        b[0..4].copy_from_slice(&SESSION_MAGIC);
        b[4..6].copy_from_slice(&PROTOCOL_VERSION.to_le_bytes());
        b[6] = self.pass;
        b[7] = self.encoding.code();
        b[8..16].copy_from_slice(&self.session_id.to_le_bytes());
        b[16..20].copy_from_slice(&self.modulus.to_le_bytes());
        b[20] = self.apply_log as u8;
        b
    }

    pub fn decode(b: &[u8; SESSION_HEADER_BYTES]) -> Result<Self, WireError> {
        if b[0..4] != SESSION_MAGIC {
            return Err(WireError::BadMagic);
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != PROTOCOL_VERSION {
            return Err(WireError::VersionMismatch(version));
        }
        let pass = b[6];
        if !matches!(pass, 1 | 2) {
            return Err(WireError::BadField("pass"));
        }
        let encoding = InputEncoding::from_code(b[7]).ok_or(WireError::BadField("encoding"))?;
        let modulus = u32::from_le_bytes(b[16..20].try_into().unwrap());
        if modulus == 0 {
            return Err(WireError::BadField("modulus"));
        }
        let apply_log = match b[20] {
            0 => false,
            1 => true,
            _ => return Err(WireError::BadField("apply_log")),
        };
        Ok(SessionHeader {
            session_id: u64::from_le_bytes(b[8..16].try_into().unwrap()),
            pass,
            encoding,
            modulus,
            apply_log,
        })
    }

    /// Same session parameters, ignoring the pass number.
    pub fn same_session(&self, other: &SessionHeader) -> bool {
        self.session_id == other.session_id
            && self.encoding == other.encoding
            && self.modulus == other.modulus
            && self.apply_log == other.apply_log
    }
}

/// `STATS` payload: pass `u32`, rows `u64`, 26 unique counts `u32`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StatsPayload {
    pub pass: u32,
    pub rows: u64,
    pub unique_counts: [u32; N_SPARSE],
}

impl StatsPayload {
    pub fn encode(&self) -> [u8; STATS_BYTES] {
        let mut b = [0u8; STATS_BYTES];
        b[0..4].copy_from_slice(&self.pass.to_le_bytes());
        b[4..12].copy_from_slice(&self.rows.to_le_bytes());
        for (i, c) in self.unique_counts.iter().enumerate() {
            b[12 + 4 * i..16 + 4 * i].copy_from_slice(&c.to_le_bytes());
        }
        b
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        if b.len() != STATS_BYTES {
            return Err(WireError::ShortPayload {
                expected: STATS_BYTES,
                found: b.len(),
            });
        }
        let mut unique_counts = [0u32; N_SPARSE];
        for (i, c) in unique_counts.iter_mut().enumerate() {
            *c = u32::from_le_bytes(b[12 + 4 * i..16 + 4 * i].try_into().unwrap());
        }
        Ok(StatsPayload {
            pass: u32::from_le_bytes(b[0..4].try_into().unwrap()),
            rows: u64::from_le_bytes(b[4..12].try_into().unwrap()),
            unique_counts,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    ProtocolViolation = 1,
    /// Pass 2 row count differs from pass 1.
    PassMismatch = 2,
    /// Input could not be decoded or looked up; carries a row.
    DecodeError = 3,
    Timeout = 4,
}

impl ErrorCode {
    pub fn from_code(c: u32) -> Option<Self> {
        Some(match c {
            1 => ErrorCode::ProtocolViolation,
            2 => ErrorCode::PassMismatch,
            3 => ErrorCode::DecodeError,
            4 => ErrorCode::Timeout,
            _ => return None,
        })
    }
}

/// `ERROR` payload: code `u32`, row `u64` (`u64::MAX` when none), then a
/// UTF-8 message filling the rest of the frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub row: Option<u64>,
    pub message: String,
}

impl ErrorPayload {
    pub fn encode(&self) -> Vec<u8> {
        let msg = self.message.as_bytes();
        let msg = &msg[..msg.len().min(MAX_PAYLOAD - 12)];
        let mut b = Vec::with_capacity(12 + msg.len());
        b.extend_from_slice(&(self.code as u32).to_le_bytes());
        b.extend_from_slice(&self.row.unwrap_or(u64::MAX).to_le_bytes());
        b.extend_from_slice(msg);
        b
    }

    pub fn decode(b: &[u8]) -> Result<Self, WireError> {
        if b.len() < 12 {
            return Err(WireError::ShortPayload {
                expected: 12,
                found: b.len(),
            });
        }
        let code = u32::from_le_bytes(b[0..4].try_into().unwrap());
        let code = ErrorCode::from_code(code).ok_or(WireError::BadField("error code"))?;
        let row = u64::from_le_bytes(b[4..12].try_into().unwrap());
        Ok(ErrorPayload {
            code,
            row: (row != u64::MAX).then_some(row),
            message: String::from_utf8_lossy(&b[12..]).into_owned(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frame_header() {
        let h = encode_frame_header(FrameType::Data, 300);
        assert_eq!(h, [1, 0x2c, 0x01, 0, 0]);
        assert_eq!(decode_frame_header(&h), Ok((FrameType::Data, 300)));
        assert_eq!(
            decode_frame_header(&[9, 0, 0, 0, 0]),
            Err(WireError::UnknownFrameType(9))
        );
        let big = ((MAX_PAYLOAD + 1) as u32).to_le_bytes();
        assert_eq!(
            decode_frame_header(&[1, big[0], big[1], big[2], big[3]]),
            Err(WireError::PayloadTooLarge(MAX_PAYLOAD as u32 + 1))
        );
    }

    #[test]
    fn session_header() {
        let h = SessionHeader {
            session_id: 0x0102_0304_0506_0708,
            pass: 2,
            encoding: InputEncoding::Binary,
            modulus: 5000,
            apply_log: true,
        };
        let b = h.encode();
        assert_eq!(&b[..4], b"PNET");
        assert_eq!(b[6], 2);
        assert_eq!(b[7], 1);
        assert_eq!(b[8], 0x08);
        assert_eq!(&b[16..20], &5000u32.to_le_bytes());
        assert_eq!(SessionHeader::decode(&b), Ok(h));
        assert!(h.same_session(&SessionHeader { pass: 1, ..h }));
        assert!(!h.same_session(&SessionHeader { modulus: 7, ..h }));

        let mut bad = b;
        bad[6] = 3;
        assert_eq!(SessionHeader::decode(&bad), Err(WireError::BadField("pass")));
        let mut bad = b;
        bad[16..20].fill(0);
        assert_eq!(SessionHeader::decode(&bad), Err(WireError::BadField("modulus")));
        let mut bad = b;
        bad[0] = 0;
        assert_eq!(SessionHeader::decode(&bad), Err(WireError::BadMagic));
    }

    #[test]
    fn error_payload() {
        let e = ErrorPayload {
            code: ErrorCode::DecodeError,
            row: Some(17),
            message: "row 17: bad byte".into(),
        };
        let b = e.encode();
        assert_eq!(&b[..4], &[3, 0, 0, 0]);
        assert_eq!(ErrorPayload::decode(&b), Ok(e));
        let none = ErrorPayload {
            code: ErrorCode::Timeout,
            row: None,
            message: String::new(),
        };
        assert_eq!(ErrorPayload::decode(&none.encode()), Ok(none));
    }

    proptest! {
        #[test]
        fn stats_round_trip(pass in 1u32..3, rows in any::<u64>(), counts in any::<[u32; 26]>()) {
            let s = StatsPayload { pass, rows, unique_counts: counts };
            prop_assert_eq!(StatsPayload::decode(&s.encode()), Ok(s));
        }
    }
}
