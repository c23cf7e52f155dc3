use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use tabprep_core::codec::{BinaryHeader, RecordKind, HEADER_BYTES};
use tabprep_core::wire::{ErrorPayload, FrameType, SessionHeader, StatsPayload, MAX_PAYLOAD};
use tabprep_core::{FormatError, InputEncoding, PipelineConfig, RECORD_BYTES};

use super::{write_frame, FrameReader};
use crate::engine::RunStats;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ClientOptions {
    /// Input bytes per `DATA` frame, at most 1 MiB.
    pub frame_bytes: usize,
    /// Random when `None`.
    pub session_id: Option<u64>,
    /// Read timeout while waiting for the server.
    pub timeout: Option<Duration>,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions {
            frame_bytes: MAX_PAYLOAD,
            session_id: None,
            timeout: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClientReport {
    /// Per-pass wall-clock times as seen by the client, and the server's
    /// final counts.
    pub stats: RunStats,
    pub pass1: StatsPayload,
    pub pass2: StatsPayload,
    pub total_seconds: f64,
}

/// Streams `input` to the server twice and writes the returned rows to
/// `output`. The modulus, log flag and input encoding come from `cfg`.
pub fn client_send(
    input: impl AsRef<Path>,
    addr: impl ToSocketAddrs,
    output: impl AsRef<Path>,
    cfg: &PipelineConfig,
) -> Result<RunStats> {
    client_send_with(input, addr, output, cfg, &ClientOptions::default()).map(|r| r.stats)
}

pub fn client_send_with(
    input: impl AsRef<Path>,
    addr: impl ToSocketAddrs,
    output: impl AsRef<Path>,
    cfg: &PipelineConfig,
    opts: &ClientOptions,
) -> Result<ClientReport> {
    let cfg = cfg.validate()?;
    let (input, output) = (input.as_ref(), output.as_ref());
    if opts.frame_bytes == 0 || opts.frame_bytes > MAX_PAYLOAD {
        return Err(Error::Protocol(format!(
            "frame size {} outside 1..={MAX_PAYLOAD}",
            opts.frame_bytes
        )));
    }

    let (body_start, expected_rows) = match cfg.input_encoding {
        InputEncoding::Utf8 => (0, None),
        InputEncoding::Binary => {
            let mut h = [0u8; HEADER_BYTES];
            File::open(input)?
                .read_exact(&mut h)
                .map_err(|_| Error::Format(FormatError::ShortRead { record: u64::MAX }))?;
            let h = BinaryHeader::decode_expecting(&h, RecordKind::Decoded)?;
            (HEADER_BYTES as u64, Some(h.row_count))
        }
    };

    let stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(opts.timeout)?;
    let mut header = SessionHeader {
        session_id: opts.session_id.unwrap_or_else(rand::random),
        pass: 1,
        encoding: cfg.input_encoding,
        modulus: cfg.modulus,
        apply_log: cfg.apply_log,
    };
    let send = Sender {
        stream: &stream,
        input,
        body_start,
        frame_bytes: opts.frame_bytes,
    };

    let t0 = Instant::now();
    let mut stats1 = None;
    send.pass(&header, |ty, payload| match ty {
        FrameType::Stats => {
            stats1 = Some(expect_stats(payload, 1)?);
            Ok(true)
        }
        other => Err(unexpected(other)),
    })?;
    let stats1 = stats1.expect("pass ends with stats");
    let pass1 = t0.elapsed().as_secs_f64();
    if let Some(rows) = expected_rows.filter(|&r| r != stats1.rows) {
        return Err(FormatError::RowCountMismatch {
            header: rows,
            actual: stats1.rows,
        }
        .into());
    }

    let t1 = Instant::now();
    let mut writer = crate::io::create_output(output)?;
    let mut stats2 = None;
    header.pass = 2;
    let outcome = send.pass(&header, |ty, payload| match ty {
        FrameType::Result if payload.len() % RECORD_BYTES == 0 => {
            writer.write_packed(payload)?;
            Ok(false)
        }
        FrameType::Result => Err(Error::Protocol(format!(
            "RESULT payload of {} bytes is not whole records",
            payload.len()
        ))),
        FrameType::Stats => {
            stats2 = Some(expect_stats(payload, 2)?);
            Ok(true)
        }
        other => Err(unexpected(other)),
    });
    let outcome = outcome.and_then(|()| {
        let stats2 = stats2.expect("pass ends with stats");
        if stats2.rows != writer.rows() || stats2.rows != stats1.rows {
            return Err(Error::Protocol(format!(
                "server reported {} rows, sent {} (pass 1: {})",
                stats2.rows,
                writer.rows(),
                stats1.rows
            )));
        }
        writer.finish()?;
        Ok(stats2)
    });
    let stats2 = match outcome {
        Ok(s) => s,
        Err(e) => {
            let _ = std::fs::remove_file(output);
            return Err(e);
        }
    };
    let pass2 = t1.elapsed().as_secs_f64();

    Ok(ClientReport {
        stats: RunStats::new(stats2.rows, pass1, pass2, stats2.unique_counts),
        pass1: stats1,
        pass2: stats2,
        total_seconds: t0.elapsed().as_secs_f64(),
    })
}

fn expect_stats(payload: &[u8], pass: u32) -> Result<StatsPayload> {
    let s = StatsPayload::decode(payload)?;
    if s.pass != pass {
        return Err(Error::Protocol(format!(
            "STATS for pass {} while in pass {pass}",
            s.pass
        )));
    }
    Ok(s)
}

fn unexpected(ty: FrameType) -> Error {
    Error::Protocol(format!("unexpected {ty:?} frame from server"))
}

struct Sender<'a> {
    stream: &'a TcpStream,
    input: &'a Path,
    body_start: u64,
    frame_bytes: usize,
}

impl Sender<'_> {
    fn send_all(&self, header: &SessionHeader) -> Result<()> {
        let mut w = BufWriter::with_capacity(self.frame_bytes + 64, self.stream);
        std::io::Write::write_all(&mut w, &header.encode())?;
        let mut file = File::open(self.input)?;
        file.seek(SeekFrom::Start(self.body_start))?;
        let mut buf = vec![0u8; self.frame_bytes];
        loop {
            let mut n = 0;
            while n < buf.len() {
                match file.read(&mut buf[n..])? {
                    0 => break,
                    k => n += k,
                }
            }
            if n == 0 {
                break;
            }
            write_frame(&mut w, FrameType::Data, &buf[..n])?;
        }
        write_frame(&mut w, FrameType::End, &[])?;
        std::io::Write::flush(&mut w)?;
        Ok(())
    }

    /// Sends one pass on a helper thread while handing server frames to
    /// `on_frame` until it returns `true`. A server `ERROR` frame wins over
    /// any local failure.
    fn pass<F>(&self, header: &SessionHeader, mut on_frame: F) -> Result<()>
    where
        F: FnMut(FrameType, &[u8]) -> Result<bool>,
    {
        thread::scope(|s| {
            let sender = s.spawn(|| self.send_all(header));
            let mut reader = FrameReader::new(self.stream);
            let received = loop {
                match reader.next() {
                    Ok((FrameType::Error, p)) => {
                        break match ErrorPayload::decode(p) {
                            Ok(p) => Err(p.into()),
                            Err(e) => Err(e.into()),
                        }
                    }
                    Ok((ty, p)) => match on_frame(ty, p) {
                        Ok(true) => break Ok(()),
                        Ok(false) => {}
                        Err(e) => break Err(e),
                    },
                    Err(e) => break Err(e),
                }
            };
            if received.is_err() {
                let _ = self.stream.shutdown(Shutdown::Both);
            }
            let sent = sender.join().unwrap_or_else(|p| std::panic::resume_unwind(p));
            match (received, sent) {
                (Err(e), _) => Err(e),
                (Ok(()), Err(e)) => Err(e),
                (Ok(()), Ok(())) => Ok(()),
            }
        })
    }
}
