//! Dataset sources, record sinks and the on-disk formats.
//!
//! Input is either tab-separated text or a binary file of decoded records;
//! output is always a binary file of transformed records. Both binary kinds
//! share the 24-byte header from [`tabprep_core::codec`].

use std::borrow::Cow;
use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use tabprep_core::codec::{self, BinaryHeader, RecordKind, RecordReassembler, HEADER_BYTES};
use tabprep_core::decoder::{Decode, Decoder};
use tabprep_core::{DecodedRecord, FormatError, InputEncoding, TransformedRecord, RECORD_BYTES};

use crate::error::Result;

/// Bytes of text handed to the decoder per step while scanning.
const TEXT_CHUNK: usize = 256 * 1024;
/// Records per batch when scanning binary input.
const BINARY_BATCH: usize = 2048;

/// Callback receiving decoded records during a pass.
pub type BatchFn<'a> = dyn FnMut(&[DecodedRecord]) -> Result<()> + 'a;

/// Input that can be read more than once.
pub trait RecordSource: Sync {
    /// Runs one complete pass over the input, handing decoded records to `f`
    /// in order. Returns the number of rows. Text is decoded with the given
    /// group width.
    fn scan(&self, decode_width: usize, f: &mut BatchFn<'_>) -> Result<u64>;
}

#[derive(Clone, Debug)]
enum Backing {
    Memory(Vec<u8>),
    File(PathBuf),
}

/// A text or binary dataset, held in memory or re-read from disk on each
/// pass.
#[derive(Clone, Debug)]
pub struct Dataset {
    encoding: InputEncoding,
    backing: Backing,
}

impl Dataset {
    /// Wraps raw file contents (for binary input, header included).
    pub fn from_bytes(encoding: InputEncoding, bytes: Vec<u8>) -> Self {
        Dataset {
            encoding,
            backing: Backing::Memory(bytes),
        }
    }

    /// File-backed dataset; every pass re-opens the file.
    pub fn open(path: impl AsRef<Path>, encoding: InputEncoding) -> Result<Self> {
        let path = path.as_ref();
        let mut file = File::open(path)?;
        if encoding == InputEncoding::Binary {
            read_decoded_header(&mut file)?;
        }
        Ok(Dataset {
            encoding,
            backing: Backing::File(path.to_path_buf()),
        })
    }

    /// Reads the whole file into memory.
    pub fn load(path: impl AsRef<Path>, encoding: InputEncoding) -> Result<Self> {
        Ok(Self::from_bytes(encoding, std::fs::read(path)?))
    }

    pub fn encoding(&self) -> InputEncoding {
        self.encoding
    }

    pub fn is_in_memory(&self) -> bool {
        matches!(self.backing, Backing::Memory(_))
    }

    /// Raw contents, reading the file if necessary.
    pub fn bytes(&self) -> Result<Cow<'_, [u8]>> {
        Ok(match &self.backing {
            Backing::Memory(b) => Cow::Borrowed(b),
            Backing::File(p) => Cow::Owned(std::fs::read(p)?),
        })
    }

    /// The same records as a binary dataset held in memory.
    pub fn to_binary(&self) -> Result<Dataset> {
        match self.encoding {
            InputEncoding::Binary => Ok(Dataset::from_bytes(
                InputEncoding::Binary,
                self.bytes()?.into_owned(),
            )),
            InputEncoding::Utf8 => {
                let mut out = Cursor::new(Vec::new());
                let mut w = PackedWriter::new(&mut out, RecordKind::Decoded)?;
                self.scan(4, &mut |batch| w.write_decoded(batch))?;
                w.finish()?;
                Ok(Dataset::from_bytes(InputEncoding::Binary, out.into_inner()))
            }
        }
    }
}

impl RecordSource for Dataset {
    fn scan(&self, decode_width: usize, f: &mut BatchFn<'_>) -> Result<u64> {
        match (&self.backing, self.encoding) {
            (Backing::Memory(b), InputEncoding::Utf8) => {
                scan_text(b.chunks(TEXT_CHUNK).map(Ok), decode_width, f)
            }
            (Backing::Memory(b), InputEncoding::Binary) => scan_binary_bytes(b, f),
            (Backing::File(p), InputEncoding::Utf8) => {
                let mut file = File::open(p)?;
                let mut buf = vec![0u8; TEXT_CHUNK];
                let chunks = std::iter::from_fn(move || match file.read(&mut buf) {
                    Ok(0) => None,
                    Ok(n) => Some(Ok(buf[..n].to_vec())),
                    Err(e) => Some(Err(e.into())),
                });
                scan_text(chunks, decode_width, f)
            }
            (Backing::File(p), InputEncoding::Binary) => scan_binary_file(p, f),
        }
    }
}

/// Opens `path` as a replayable record source.
pub fn read_source(path: impl AsRef<Path>, encoding: InputEncoding) -> Result<Dataset> {
    Dataset::open(path, encoding)
}

fn scan_text<C, I>(chunks: I, width: usize, f: &mut BatchFn<'_>) -> Result<u64>
where
    C: AsRef<[u8]>,
    I: Iterator<Item = Result<C>>,
{
    let mut decoder = Decoder::for_width(width);
    let mut batch = Vec::with_capacity(TEXT_CHUNK / 128);
    for chunk in chunks {
        let chunk = chunk?;
        let res = decoder.feed(chunk.as_ref(), &mut |r| batch.push(r));
        if !batch.is_empty() {
            f(&batch)?;
            batch.clear();
        }
        res?;
    }
    let res = decoder.finish(&mut |r| batch.push(r));
    if !batch.is_empty() {
        f(&batch)?;
    }
    res?;
    Ok(decoder.rows())
}

fn read_decoded_header(r: &mut impl Read) -> Result<BinaryHeader> {
    let mut h = [0u8; HEADER_BYTES];
    let mut got = 0;
    while got < HEADER_BYTES {
        match r.read(&mut h[got..])? {
            0 => return Err(FormatError::ShortRead { record: u64::MAX }.into()),
            n => got += n,
        }
    }
    Ok(BinaryHeader::decode_expecting(&h, RecordKind::Decoded)?)
}

fn check_count(header: &BinaryHeader, actual: u64) -> Result<u64> {
    if header.row_count != actual {
        return Err(FormatError::RowCountMismatch {
            header: header.row_count,
            actual,
        }
        .into());
    }
    Ok(actual)
}

fn scan_binary_bytes(bytes: &[u8], f: &mut BatchFn<'_>) -> Result<u64> {
    let header = BinaryHeader::decode_expecting(bytes, RecordKind::Decoded)?;
    let body = &bytes[HEADER_BYTES..];
    let whole = body.len() / RECORD_BYTES;
    let mut batch = Vec::with_capacity(BINARY_BATCH);
    for chunk in body[..whole * RECORD_BYTES].chunks(BINARY_BATCH * RECORD_BYTES) {
        batch.clear();
        batch.extend(codec::records(chunk, 0)?.map(codec::unpack_decoded));
        f(&batch)?;
    }
    if body.len() % RECORD_BYTES != 0 {
        return Err(FormatError::ShortRead {
            record: whole as u64,
        }
        .into());
    }
    check_count(&header, whole as u64)
}

fn scan_binary_file(path: &Path, f: &mut BatchFn<'_>) -> Result<u64> {
    let mut file = BufReader::with_capacity(1 << 20, File::open(path)?);
    let header = read_decoded_header(&mut file)?;
    let mut buf = vec![0u8; BINARY_BATCH * RECORD_BYTES];
    let mut reasm = RecordReassembler::new();
    let mut batch = Vec::with_capacity(BINARY_BATCH);
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        batch.clear();
        reasm.feed(&buf[..n], |r| batch.push(codec::unpack_decoded(r)));
        if !batch.is_empty() {
            f(&batch)?;
        }
    }
    let rows = reasm.finish()?;
    check_count(&header, rows)
}

/// Destination for transformed rows, written in input order.
pub trait RecordSink {
    fn write_batch(&mut self, records: &[TransformedRecord]) -> Result<()>;
}

impl RecordSink for Vec<TransformedRecord> {
    fn write_batch(&mut self, records: &[TransformedRecord]) -> Result<()> {
        self.extend_from_slice(records);
        Ok(())
    }
}

impl<S: RecordSink + ?Sized> RecordSink for &mut S {
    fn write_batch(&mut self, records: &[TransformedRecord]) -> Result<()> {
        (**self).write_batch(records)
    }
}

/// Counts rows and drops them.
#[derive(Debug, Default)]
pub struct NullSink {
    pub rows: u64,
}

impl RecordSink for NullSink {
    fn write_batch(&mut self, records: &[TransformedRecord]) -> Result<()> {
        self.rows += records.len() as u64;
        Ok(())
    }
}

/// Writes a binary file: header first, rows as they arrive, and the row
/// count patched into the header by [`finish`](PackedWriter::finish).
pub struct PackedWriter<W: Write + Seek> {
    out: W,
    kind: RecordKind,
    start: u64,
    rows: u64,
    buf: Vec<u8>,
}

impl<W: Write + Seek> PackedWriter<W> {
    pub fn new(mut out: W, kind: RecordKind) -> Result<Self> {
        let start = out.stream_position()?;
        out.write_all(&BinaryHeader::new(kind, 0).encode())?;
        Ok(PackedWriter {
            out,
            kind,
            start,
            rows: 0,
            buf: Vec::new(),
        })
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn write_decoded(&mut self, records: &[DecodedRecord]) -> Result<()> {
        debug_assert_eq!(self.kind, RecordKind::Decoded);
        self.buf.resize(records.len() * RECORD_BYTES, 0);
        for (r, out) in records.iter().zip(self.buf.chunks_exact_mut(RECORD_BYTES)) {
            codec::pack_decoded_into(r, out.try_into().unwrap());
        }
        self.out.write_all(&self.buf)?;
        self.rows += records.len() as u64;
        Ok(())
    }

    /// Appends already-packed records verbatim.
    pub fn write_packed(&mut self, bytes: &[u8]) -> Result<()> {
        debug_assert_eq!(bytes.len() % RECORD_BYTES, 0);
        self.out.write_all(bytes)?;
        self.rows += (bytes.len() / RECORD_BYTES) as u64;
        Ok(())
    }

    /// Patches the header and returns the writer, positioned at the end.
    pub fn finish(mut self) -> Result<W> {
        let end = self.out.stream_position()?;
        self.out.seek(SeekFrom::Start(self.start))?;
        self.out
            .write_all(&BinaryHeader::new(self.kind, self.rows).encode())?;
        self.out.seek(SeekFrom::Start(end))?;
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write + Seek> RecordSink for PackedWriter<W> {
    fn write_batch(&mut self, records: &[TransformedRecord]) -> Result<()> {
        debug_assert_eq!(self.kind, RecordKind::Transformed);
        self.buf.resize(records.len() * RECORD_BYTES, 0);
        for (r, out) in records.iter().zip(self.buf.chunks_exact_mut(RECORD_BYTES)) {
            codec::pack_transformed_into(r, out.try_into().unwrap());
        }
        self.out.write_all(&self.buf)?;
        self.rows += records.len() as u64;
        Ok(())
    }
}

/// Output file writer.
pub fn create_output(path: impl AsRef<Path>) -> Result<PackedWriter<BufWriter<File>>> {
    let file = BufWriter::with_capacity(1 << 20, File::create(path)?);
    PackedWriter::new(file, RecordKind::Transformed)
}

/// Packs transformed rows into the output file format in memory.
pub fn pack_output(records: &[TransformedRecord]) -> Vec<u8> {
    let mut out = Cursor::new(Vec::with_capacity(HEADER_BYTES + records.len() * RECORD_BYTES));
    let mut w = PackedWriter::new(&mut out, RecordKind::Transformed).expect("in-memory write");
    w.write_batch(records).expect("in-memory write");
    w.finish().expect("in-memory write");
    out.into_inner()
}

/// Reads an output file back into records.
pub fn read_output(bytes: &[u8]) -> Result<Vec<TransformedRecord>> {
    let header = BinaryHeader::decode_expecting(bytes, RecordKind::Transformed)?;
    let records: Vec<_> = codec::records(&bytes[HEADER_BYTES..], 0)?
        .map(codec::unpack_transformed)
        .collect();
    check_count(&header, records.len() as u64)?;
    Ok(records)
}

/// Decodes a text dataset and writes it as a binary dataset. Returns rows.
pub fn convert_to_binary(input: impl AsRef<Path>, output: impl AsRef<Path>) -> Result<u64> {
    let src = Dataset::open(input, InputEncoding::Utf8)?;
    let file = BufWriter::with_capacity(1 << 20, File::create(output)?);
    let mut w = PackedWriter::new(file, RecordKind::Decoded)?;
    src.scan(4, &mut |batch| w.write_decoded(batch))?;
    let rows = w.rows();
    w.finish()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn text(rows: usize) -> Vec<u8> {
        let mut s = String::new();
        for i in 0..rows {
            let mut f = vec![String::new(); 40];
            f[0] = (i % 2).to_string();
            f[1] = format!("-{i}");
            f[20] = format!("{:x}", i * 977);
            s.push_str(&f.join("\t"));
            s.push('\n');
        }
        s.into_bytes()
    }

    fn collect(src: &dyn RecordSource) -> Result<Vec<DecodedRecord>> {
        let mut all = Vec::new();
        src.scan(4, &mut |b| {
            all.extend_from_slice(b);
            Ok(())
        })?;
        Ok(all)
    }

    #[test]
    fn text_and_binary_agree() {
        let utf8 = Dataset::from_bytes(InputEncoding::Utf8, text(5000));
        let bin = utf8.to_binary().unwrap();
        let a = collect(&utf8).unwrap();
        assert_eq!(a.len(), 5000);
        assert_eq!(a, collect(&bin).unwrap());
        assert_eq!(bin.bytes().unwrap().len(), 24 + 5000 * 160);
    }

    #[test]
    fn truncated_and_miscounted_binary() {
        let bin = Dataset::from_bytes(InputEncoding::Utf8, text(10))
            .to_binary()
            .unwrap()
            .bytes()
            .unwrap()
            .into_owned();
        let cut = Dataset::from_bytes(InputEncoding::Binary, bin[..24 + 3 * 160 + 7].to_vec());
        assert!(matches!(
            collect(&cut),
            Err(Error::Format(FormatError::ShortRead { record: 3 }))
        ));
        let mut lie = bin.clone();
        lie[8] = 11;
        let lie = Dataset::from_bytes(InputEncoding::Binary, lie);
        assert!(matches!(
            collect(&lie),
            Err(Error::Format(FormatError::RowCountMismatch {
                header: 11,
                actual: 10
            }))
        ));
        let mut magic = bin;
        magic[0] = b'Q';
        let magic = Dataset::from_bytes(InputEncoding::Binary, magic);
        assert!(matches!(
            collect(&magic),
            Err(Error::Format(FormatError::BadMagic))
        ));
    }

    #[test]
    fn packed_output_round_trip() {
        let mut r = TransformedRecord::default();
        r.label = 1;
        r.dense[3] = 2.5;
        r.sparse[7] = 9;
        let bytes = pack_output(&[r, r]);
        assert_eq!(bytes.len(), 24 + 320);
        assert_eq!(bytes[8], 2);
        assert_eq!(read_output(&bytes).unwrap(), vec![r, r]);
    }
}
