use std::io::{self, Read};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tabprep_core::codec::{self, RecordReassembler};
use tabprep_core::decoder::{Decode, Decoder};
use tabprep_core::wire::{
    FrameType, SessionHeader, StatsPayload, MAX_PAYLOAD, SESSION_HEADER_BYTES,
};
use tabprep_core::{InputEncoding, PipelineConfig, TransformedRecord, RECORD_BYTES};

use super::{error_payload, write_frame, FrameReader, RESULT_RECORDS};
use crate::engine::{apply_vocabularies, build_vocabularies};
use crate::error::{Error, Result};
use crate::io::{BatchFn, RecordSink};

#[derive(Clone, Debug)]
pub struct ServeOptions {
    /// A session waiting longer than this for the client is aborted with a
    /// `Timeout` error.
    pub idle_timeout: Option<Duration>,
    /// Stop accepting after this many connections and return once they are
    /// done.
    pub max_connections: Option<usize>,
    /// Cap on the per-session working buffers in bytes, vocabularies
    /// excluded. Limits the engine's channel capacity.
    pub buffer_budget: Option<usize>,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions {
            idle_timeout: Some(Duration::from_secs(60)),
            max_connections: None,
            buffer_budget: None,
        }
    }
}

/// Channel capacity, in rows, that keeps a session's buffers within
/// `budget` bytes: four payload-sized buffers (frame read, decoded batch,
/// result frame, slack) plus six copies of the in-flight rows (demux
/// staging, lane inputs, lanes at work, lane outputs, remux columns and
/// rows).
pub fn capacity_for_budget(budget: usize) -> usize {
    (budget.saturating_sub(4 * MAX_PAYLOAD) / (6 * RECORD_BYTES)).max(1)
}

pub struct Server {
    listener: TcpListener,
    cfg: PipelineConfig,
    opts: ServeOptions,
    stop: Arc<AtomicBool>,
}

/// Binds the listening socket. Session headers override the modulus,
/// encoding and log flag of `cfg`; the rest applies to every session.
pub fn bind(addr: impl ToSocketAddrs, cfg: &PipelineConfig, opts: ServeOptions) -> Result<Server> {
    cfg.validate()?;
    Ok(Server {
        listener: TcpListener::bind(addr)?,
        cfg: *cfg,
        opts,
        stop: Arc::new(AtomicBool::new(false)),
    })
}

/// Binds and serves until `opts.max_connections` have been handled (or
/// forever).
pub fn serve(addr: impl ToSocketAddrs, cfg: &PipelineConfig, opts: ServeOptions) -> Result<()> {
    bind(addr, cfg, opts)?.run()
}

impl Server {
    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub fn run(self) -> Result<()> {
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        let mut accepted = 0usize;
        while self.opts.max_connections.is_none_or(|max| accepted < max) {
            let (stream, peer) = match self.listener.accept() {
                Ok(c) => c,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e.into()),
            };
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            accepted += 1;
            workers.retain(|w| !w.is_finished());
            let cfg = self.cfg;
            let opts = self.opts.clone();
            workers.push(
                thread::Builder::new()
                    .name(format!("session-{peer}"))
                    .spawn(move || handle_connection(stream, peer, &cfg, &opts))?,
            );
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> Result<ServerHandle> {
        let addr = self.local_addr()?;
        let stop = self.stop.clone();
        let thread = thread::Builder::new()
            .name("accept".into())
            .spawn(move || self.run())?;
        Ok(ServerHandle { addr, stop, thread })
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: JoinHandle<Result<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting, waits for open sessions to finish.
    pub fn shutdown(self) -> Result<()> {
        self.stop.store(true, Ordering::SeqCst);
        if !self.thread.is_finished() {
            // Wake the blocking accept.
            let _ = TcpStream::connect(self.addr);
        }
        self.thread
            .join()
            .unwrap_or_else(|p| std::panic::resume_unwind(p))
    }
}

fn handle_connection(stream: TcpStream, peer: SocketAddr, cfg: &PipelineConfig, opts: &ServeOptions) {
    let setup = stream
        .set_read_timeout(opts.idle_timeout)
        .and_then(|()| stream.set_write_timeout(opts.idle_timeout))
        .and_then(|()| stream.set_nodelay(true));
    if let Err(e) = setup {
        log::warn!("{peer}: {e}");
        return;
    }
    let started = Instant::now();
    match session(&stream, cfg, opts) {
        Ok(rows) => log::info!("{peer}: {rows} rows in {:.3}s", started.elapsed().as_secs_f64()),
        Err(e) => {
            log::warn!("{peer}: session aborted: {e}");
            if let Some(p) = error_payload(&e) {
                let _ = write_frame(&mut &stream, FrameType::Error, &p.encode());
                let _ = stream.shutdown(Shutdown::Write);
                drain(&stream);
            }
        }
    }
}

/// Reads until the client closes, so that closing our end does not reset
/// the connection before the client has read the error.
fn drain(mut stream: &TcpStream) {
    let mut scratch = [0u8; 64 * 1024];
    while let Ok(n) = stream.read(&mut scratch) {
        if n == 0 {
            break;
        }
    }
}

fn read_session_header(r: &mut impl Read) -> Result<SessionHeader> {
    let mut b = [0u8; SESSION_HEADER_BYTES];
    r.read_exact(&mut b)?;
    Ok(SessionHeader::decode(&b)?)
}

fn session(stream: &TcpStream, base: &PipelineConfig, opts: &ServeOptions) -> Result<u64> {
    let mut reader = FrameReader::new(stream);
    let h1 = read_session_header(reader.get_mut())?;
    if h1.pass != 1 {
        return Err(Error::Protocol(format!(
            "pass {} for unknown session {:#x}",
            h1.pass, h1.session_id
        )));
    }
    let mut cfg = PipelineConfig {
        modulus: h1.modulus,
        apply_log: h1.apply_log,
        input_encoding: h1.encoding,
        cache_records: false,
        ..*base
    };
    if let Some(budget) = opts.buffer_budget {
        cfg.channel_capacity = cfg.channel_capacity.min(capacity_for_budget(budget));
    }
    let cfg = cfg.validate()?;

    let (vocab, rows1) = build_vocabularies(|f| stream_pass(&mut reader, &cfg, f), &cfg)?;
    let stats = StatsPayload {
        pass: 1,
        rows: rows1,
        unique_counts: vocab.unique_counts(),
    };
    write_frame(&mut &*stream, FrameType::Stats, &stats.encode())?;

    let h2 = read_session_header(reader.get_mut())?;
    if h2.pass != 2 || !h2.same_session(&h1) {
        return Err(Error::Protocol(format!(
            "expected pass 2 of session {:#x}, got pass {} of session {:#x}",
            h1.session_id, h2.pass, h2.session_id
        )));
    }
    let mut sink = ResultSink::new(stream);
    let rows2 = apply_vocabularies(|f| stream_pass(&mut reader, &cfg, f), &cfg, &vocab, &mut sink)?;
    sink.flush()?;
    if rows2 != rows1 {
        return Err(Error::PassMismatch {
            pass1: rows1,
            pass2: rows2,
        });
    }
    let stats = StatsPayload {
        pass: 2,
        rows: rows2,
        unique_counts: vocab.unique_counts(),
    };
    write_frame(&mut &*stream, FrameType::Stats, &stats.encode())?;
    Ok(rows2)
}

/// Decodes one pass of `DATA` frames up to `END`.
fn stream_pass<R: Read>(
    reader: &mut FrameReader<R>,
    cfg: &PipelineConfig,
    f: &mut BatchFn<'_>,
) -> Result<u64> {
    let mut batch = Vec::new();
    match cfg.input_encoding {
        InputEncoding::Utf8 => {
            let mut dec = Decoder::for_width(cfg.decode_group_width);
            loop {
                let (ty, payload) = reader.next()?;
                let res = match ty {
                    FrameType::Data => dec.feed(payload, &mut |r| batch.push(r)),
                    FrameType::End => dec.finish(&mut |r| batch.push(r)),
                    other => return Err(unexpected(other)),
                };
                if !batch.is_empty() {
                    f(&batch)?;
                    batch.clear();
                }
                res?;
                if ty == FrameType::End {
                    return Ok(dec.rows());
                }
            }
        }
        InputEncoding::Binary => {
            let mut reasm = RecordReassembler::new();
            loop {
                let (ty, payload) = reader.next()?;
                match ty {
                    FrameType::Data => {
                        reasm.feed(payload, |r| batch.push(codec::unpack_decoded(r)));
                        if !batch.is_empty() {
                            f(&batch)?;
                            batch.clear();
                        }
                    }
                    FrameType::End => return Ok(reasm.finish()?),
                    other => return Err(unexpected(other)),
                }
            }
        }
    }
}

fn unexpected(ty: FrameType) -> Error {
    Error::Protocol(format!("unexpected {ty:?} frame from client"))
}

/// Packs transformed rows into `RESULT` frames.
struct ResultSink<'a> {
    stream: &'a TcpStream,
    buf: Vec<u8>,
}

impl<'a> ResultSink<'a> {
    fn new(stream: &'a TcpStream) -> Self {
        ResultSink {
            stream,
            buf: Vec::with_capacity(RESULT_RECORDS * RECORD_BYTES),
        }
    }

    fn flush(&mut self) -> Result<()> {
        if !self.buf.is_empty() {
            write_frame(&mut self.stream, FrameType::Result, &self.buf)?;
            self.buf.clear();
        }
        Ok(())
    }
}

impl RecordSink for ResultSink<'_> {
    fn write_batch(&mut self, mut records: &[TransformedRecord]) -> Result<()> {
        while !records.is_empty() {
            let room = RESULT_RECORDS - self.buf.len() / RECORD_BYTES;
            let (head, rest) = records.split_at(room.min(records.len()));
            let start = self.buf.len();
            self.buf.resize(start + head.len() * RECORD_BYTES, 0);
            for (r, out) in head.iter().zip(self.buf[start..].chunks_exact_mut(RECORD_BYTES)) {
                codec::pack_transformed_into(r, out.try_into().unwrap());
            }
            if self.buf.len() == RESULT_RECORDS * RECORD_BYTES {
                self.flush()?;
            }
            records = rest;
        }
        Ok(())
    }
}
