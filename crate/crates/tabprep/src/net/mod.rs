//! Network-attached mode: the server runs both passes over a dataset the
//! client streams to it twice, and sends transformed rows back.
//!
//! A connection carries one session. Each pass opens with a raw 24-byte
//! session header, followed by framed traffic:
//!
//! ```text
//! client                               server
//! SessionHeader(pass 1)  ──────────▶
//! DATA* END              ──────────▶
//!                        ◀──────────   STATS(pass 1)
//! SessionHeader(pass 2)  ──────────▶
//! DATA* END              ──────────▶   (concurrently)
//!                        ◀──────────   RESULT* STATS(pass 2)
//! ```
//!
//! Either side may instead receive an `ERROR` frame, after which the server
//! closes the connection.

mod client;
mod server;

use std::io::{self, Read, Write};

use tabprep_core::wire::{
    decode_frame_header, encode_frame_header, ErrorCode, ErrorPayload, FrameType,
    FRAME_HEADER_BYTES, MAX_PAYLOAD,
};
use tabprep_core::RECORD_BYTES;

use crate::error::{Error, Result};

pub use client::{client_send, client_send_with, ClientOptions, ClientReport};
pub use server::{bind, serve, ServeOptions, Server, ServerHandle};

/// Whole records per `RESULT` frame.
pub const RESULT_RECORDS: usize = MAX_PAYLOAD / RECORD_BYTES;

/// Environment variable naming the default server address.
pub const SERVER_ENV: &str = "TABPREP_SERVER";

pub(crate) fn write_frame(w: &mut impl Write, ty: FrameType, payload: &[u8]) -> io::Result<()> {
    debug_assert!(payload.len() <= MAX_PAYLOAD);
    w.write_all(&encode_frame_header(ty, payload.len()))?;
    w.write_all(payload)
}

/// Reads frames into a reused buffer.
pub(crate) struct FrameReader<R> {
    inner: R,
    buf: Vec<u8>,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        FrameReader {
            inner,
            buf: Vec::new(),
        }
    }

    pub fn get_mut(&mut self) -> &mut R {
        &mut self.inner
    }

    pub fn next(&mut self) -> Result<(FrameType, &[u8])> {
        let mut h = [0u8; FRAME_HEADER_BYTES];
        self.inner.read_exact(&mut h)?;
        let (ty, len) = decode_frame_header(&h)?;
        self.buf.resize(len, 0);
        self.inner.read_exact(&mut self.buf)?;
        Ok((ty, &self.buf))
    }
}

pub(crate) fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

/// The `ERROR` frame reporting `e` to the peer, or `None` when the
/// connection itself is gone.
pub(crate) fn error_payload(e: &Error) -> Option<ErrorPayload> {
    let (code, row) = match e {
        Error::Decode(_) | Error::Vocab { .. } => (ErrorCode::DecodeError, e.row()),
        Error::PassMismatch { .. } => (ErrorCode::PassMismatch, None),
        Error::Io(io) if is_timeout(io) => (ErrorCode::Timeout, None),
        Error::Io(_) | Error::Disconnected(_) => return None,
        _ => (ErrorCode::ProtocolViolation, e.row()),
    };
    Some(ErrorPayload {
        code,
        row,
        message: e.to_string(),
    })
}

impl From<ErrorPayload> for Error {
    fn from(p: ErrorPayload) -> Self {
        Error::Remote {
            code: p.code,
            row: p.row,
            message: p.message,
        }
    }
}
