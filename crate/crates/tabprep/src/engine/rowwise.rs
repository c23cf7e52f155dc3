//! Row-wise multithreaded baseline in four fork-join stages: split the input
//! into contiguous chunks, build per-chunk sub-dictionaries and merge them,
//! apply the merged vocabularies, and concatenate the chunk outputs.

use std::borrow::Cow;
use std::path::PathBuf;
use std::thread;
use std::time::Instant;

use tabprep_core::codec::{self, BinaryHeader, RecordKind, HEADER_BYTES};
use tabprep_core::decoder::{Decode, Decoder};
use tabprep_core::ops::{modulus, transform_dense};
use tabprep_core::{
    DecodedRecord, FormatError, InputEncoding, PipelineConfig, SpillMode, TransformedRecord,
    VocabTable, N_SPARSE, RECORD_BYTES,
};

use super::{merge_subvocabs, RunStats, StageTimes, SubVocab, SubVocabBuilder, VocabSet};
use crate::error::{Error, Result};
use crate::io::{Dataset, RecordSink};

/// Intermediate data of one chunk, in memory or in a spill file.
enum Stash<T> {
    Memory(T),
    Disk(PathBuf),
}

struct Chunk<'a> {
    first_row: u64,
    rows: u64,
    input: Stash<Cow<'a, [u8]>>,
}

fn join<T>(h: thread::ScopedJoinHandle<'_, T>) -> T {
    h.join().unwrap_or_else(|p| std::panic::resume_unwind(p))
}

fn collect_results<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let mut ok = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => errors.push(e),
        }
    }
    match Error::first_of(errors) {
        Some(e) => Err(e),
        None => Ok(ok),
    }
}

/// Number of text rows, counting a final row without a newline.
fn text_rows(bytes: &[u8]) -> u64 {
    let newlines = bytes.iter().filter(|&&b| b == b'\n').count() as u64;
    newlines + u64::from(bytes.last().is_some_and(|&b| b != b'\n'))
}

/// Splits text at row boundaries so that chunk `i` starts at row
/// `bounds[i]`.
fn split_text<'a>(bytes: &'a [u8], bounds: &[u64]) -> Vec<&'a [u8]> {
    let mut starts = Vec::with_capacity(bounds.len());
    let mut next = 0;
    let mut row = 0u64;
    if bounds.first() == Some(&0) {
        starts.push(0);
        next = 1;
    }
    for (i, &b) in bytes.iter().enumerate() {
        if next == bounds.len() {
            break;
        }
        if b == b'\n' {
            row += 1;
            while next < bounds.len() && bounds[next] == row {
                starts.push(i + 1);
                next += 1;
            }
        }
    }
    starts.push(bytes.len());
    starts.windows(2).map(|w| &bytes[w[0]..w[1]]).collect()
}

fn decode_chunk(
    bytes: &[u8],
    encoding: InputEncoding,
    width: usize,
    first_row: u64,
) -> Result<Vec<DecodedRecord>> {
    match encoding {
        InputEncoding::Utf8 => {
            let mut out = Vec::new();
            let mut dec = Decoder::for_width(width);
            let mut emit = |r| out.push(r);
            dec.feed(bytes, &mut emit)
                .and_then(|()| dec.finish(&mut emit))
                .map_err(|e| e.offset_rows(first_row))?;
            Ok(out)
        }
        InputEncoding::Binary => Ok(codec::records(bytes, first_row)?
            .map(codec::unpack_decoded)
            .collect()),
    }
}

fn pack_all<T>(records: &[T], pack: fn(&T, &mut [u8; RECORD_BYTES])) -> Vec<u8> {
    let mut out = vec![0u8; records.len() * RECORD_BYTES];
    for (r, b) in records.iter().zip(out.chunks_exact_mut(RECORD_BYTES)) {
        pack(r, b.try_into().unwrap());
    }
    out
}

/// Runs the row-wise baseline with `threads` workers. Intermediate sub-files
/// live in memory or in a temporary directory per
/// `cfg.intermediate_spill`. More threads than rows are clamped to the row
/// count.
pub fn run_rowwise_baseline<S>(
    src: &Dataset,
    cfg: &PipelineConfig,
    sink: &mut S,
    threads: usize,
) -> Result<RunStats>
where
    S: RecordSink + ?Sized,
{
    cfg.validate()?;
    if threads == 0 {
        return Err(tabprep_core::ConfigError::Invalid {
            field: "rowwise_threads",
            message: "thread count must be ≥ 1",
        }
        .into());
    }
    let m = cfg.modulus;
    let width = cfg.decode_group_width;
    let encoding = src.encoding();
    let spill = match cfg.intermediate_spill {
        SpillMode::Memory => None,
        SpillMode::Disk => Some(tempfile::Builder::new().prefix("tabprep-").tempdir()?),
    };
    let bytes = src.bytes()?;

    // Split input file.
    let t_split = Instant::now();
    let (body, rows): (&[u8], u64) = match encoding {
        InputEncoding::Utf8 => (&bytes, text_rows(&bytes)),
        InputEncoding::Binary => {
            let header = BinaryHeader::decode_expecting(&bytes, RecordKind::Decoded)?;
            let body = &bytes[HEADER_BYTES..];
            let whole = (body.len() / RECORD_BYTES) as u64;
            if body.len() % RECORD_BYTES != 0 {
                return Err(FormatError::ShortRead { record: whole }.into());
            }
            if whole != header.row_count {
                return Err(FormatError::RowCountMismatch {
                    header: header.row_count,
                    actual: whole,
                }
                .into());
            }
            (body, whole)
        }
    };
    let t = if rows == 0 {
        1
    } else if threads as u64 > rows {
        log::warn!("{threads} threads for {rows} rows; using {rows}");
        rows as usize
    } else {
        threads
    };
    let bounds: Vec<u64> = (0..t as u64).map(|i| rows * i / t as u64).collect();
    let pieces: Vec<&[u8]> = match encoding {
        InputEncoding::Utf8 => split_text(body, &bounds),
        InputEncoding::Binary => {
            let mut p = Vec::with_capacity(t);
            for (i, &b) in bounds.iter().enumerate() {
                let end = bounds.get(i + 1).copied().unwrap_or(rows);
                p.push(&body[b as usize * RECORD_BYTES..end as usize * RECORD_BYTES]);
            }
            p
        }
    };
    let mut chunks = Vec::with_capacity(t);
    for (i, piece) in pieces.into_iter().enumerate() {
        let first_row = bounds[i];
        let end = bounds.get(i + 1).copied().unwrap_or(rows);
        let input = match &spill {
            None => Stash::Memory(Cow::Owned(piece.to_vec())),
            Some(dir) => {
                let path = dir.path().join(format!("split-{i}"));
                std::fs::write(&path, piece)?;
                Stash::Disk(path)
            }
        };
        chunks.push(Chunk {
            first_row,
            rows: end - first_row,
            input,
        });
    }
    drop(bytes);
    let split = t_split.elapsed().as_secs_f64();

    // Generate vocabulary: per-chunk sub-dictionaries, then the merge.
    let t_gen = Instant::now();
    type GenOut = (Vec<SubVocab>, Stash<Vec<DecodedRecord>>);
    let gen: Vec<Result<GenOut>> = thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .enumerate()
            .map(|(i, chunk)| {
                let spill = spill.as_ref();
                s.spawn(move || -> Result<GenOut> {
                    let input: Cow<[u8]> = match &chunk.input {
                        Stash::Memory(b) => Cow::Borrowed(b),
                        Stash::Disk(p) => Cow::Owned(std::fs::read(p)?),
                    };
                    let mut records = decode_chunk(&input, encoding, width, chunk.first_row)?;
                    drop(input);
                    debug_assert_eq!(records.len() as u64, chunk.rows);
                    let mut builders: Vec<SubVocabBuilder> =
                        (0..N_SPARSE).map(|_| SubVocabBuilder::new()).collect();
                    for r in &mut records {
                        for (b, v) in builders.iter_mut().zip(r.sparse.iter_mut()) {
                            *v = modulus(*v, m);
                            b.observe(*v);
                        }
                    }
                    let subs = builders.into_iter().map(|b| b.finish(i)).collect();
                    let stash = match spill {
                        None => Stash::Memory(records),
                        Some(dir) => {
                            let path = dir.path().join(format!("gen-{i}"));
                            std::fs::write(&path, pack_all(&records, codec::pack_decoded_into))?;
                            Stash::Disk(path)
                        }
                    };
                    Ok((subs, stash))
                })
            })
            .collect();
        handles.into_iter().map(join).collect()
    });
    drop(chunks);
    let gen = collect_results(gen)?;
    let mut per_column: Vec<Vec<SubVocab>> = (0..N_SPARSE).map(|_| Vec::with_capacity(t)).collect();
    let mut stashes = Vec::with_capacity(t);
    for (subs, stash) in gen {
        for (col, sub) in per_column.iter_mut().zip(subs) {
            col.push(sub);
        }
        stashes.push(stash);
    }
    let tables = per_column
        .iter()
        .map(|parts| merge_subvocabs(parts, m))
        .collect::<Result<Vec<VocabTable>, _>>()?;
    drop(per_column);
    let vocab = VocabSet::from_tables(tables);
    let gen_vocab = t_gen.elapsed().as_secs_f64();

    // Apply vocabulary.
    let t_apply = Instant::now();
    let vocab_ref = &vocab;
    let applied: Vec<Result<Stash<Vec<TransformedRecord>>>> = thread::scope(|s| {
        let handles: Vec<_> = stashes
            .into_iter()
            .enumerate()
            .map(|(i, stash)| {
                let spill = spill.as_ref();
                let first_row = bounds[i];
                s.spawn(move || -> Result<Stash<Vec<TransformedRecord>>> {
                    let records = match stash {
                        Stash::Memory(r) => r,
                        Stash::Disk(p) => {
                            let b = std::fs::read(&p)?;
                            let r: Vec<_> = codec::records(&b, first_row)?
                                .map(codec::unpack_decoded)
                                .collect();
                            r
                        }
                    };
                    let mut out = Vec::with_capacity(records.len());
                    for (k, r) in records.iter().enumerate() {
                        let mut o = TransformedRecord {
                            label: r.label,
                            ..Default::default()
                        };
                        for (d, &x) in o.dense.iter_mut().zip(&r.dense) {
                            *d = transform_dense(x, cfg.apply_log);
                        }
                        for c in 0..N_SPARSE {
                            o.sparse[c] = vocab_ref.table(c).lookup(r.sparse[c]).map_err(
                                |source| Error::Vocab {
                                    row: first_row + k as u64,
                                    column: c,
                                    source,
                                },
                            )?;
                        }
                        out.push(o);
                    }
                    Ok(match spill {
                        None => Stash::Memory(out),
                        Some(dir) => {
                            let path = dir.path().join(format!("apply-{i}"));
                            std::fs::write(&path, pack_all(&out, codec::pack_transformed_into))?;
                            Stash::Disk(path)
                        }
                    })
                })
            })
            .collect();
        handles.into_iter().map(join).collect()
    });
    let applied = collect_results(applied)?;
    let apply_vocab = t_apply.elapsed().as_secs_f64();

    // Concatenate final results.
    let t_cat = Instant::now();
    let mut written = 0u64;
    for (i, stash) in applied.into_iter().enumerate() {
        match stash {
            Stash::Memory(out) => {
                sink.write_batch(&out)?;
                written += out.len() as u64;
            }
            Stash::Disk(p) => {
                let b = std::fs::read(&p)?;
                let out: Vec<_> = codec::records(&b, bounds[i])?
                    .map(codec::unpack_transformed)
                    .collect();
                sink.write_batch(&out)?;
                written += out.len() as u64;
            }
        }
    }
    let concatenate = t_cat.elapsed().as_secs_f64();
    debug_assert_eq!(written, rows);

    let mut stats = RunStats::new(
        rows,
        split + gen_vocab,
        apply_vocab + concatenate,
        vocab.unique_counts(),
    );
    stats.stages = Some(StageTimes {
        split,
        gen_vocab,
        apply_vocab,
        concatenate,
    });
    Ok(stats)
}
