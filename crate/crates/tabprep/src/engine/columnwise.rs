//! Column-wise pipelined engine.
//!
//! A demultiplexer splits incoming records into per-column batches, one
//! worker lane per column processes its stream independently, and (in the
//! second pass) a remultiplexer zips the lanes back into rows. Lanes talk
//! only through bounded channels; each sparse lane owns its vocabulary.

use std::thread;
use std::time::Instant;

use crossbeam_channel::{bounded, Receiver, Sender};
use tabprep_core::ops::{modulus, transform_dense};
use tabprep_core::schema::{FIRST_DENSE, FIRST_SPARSE};
use tabprep_core::{
    DecodedRecord, PipelineConfig, TransformedRecord, VocabTable, N_COLUMNS, N_DENSE, N_SPARSE,
};

use super::{RunStats, VocabSet};
use crate::error::{Error, Result};
use crate::io::{BatchFn, RecordSink, RecordSource};

const MAX_BATCH_ROWS: usize = 4096;

/// Rows per channel message and messages per channel for a channel capacity
/// given in rows.
pub fn batching(capacity: usize) -> (usize, usize) {
    let rows = capacity.clamp(1, MAX_BATCH_ROWS);
    (rows, (capacity / rows).max(1))
}

fn join<T>(h: thread::ScopedJoinHandle<'_, T>) -> T {
    h.join().unwrap_or_else(|p| std::panic::resume_unwind(p))
}

/// First pass: feeds every sparse value through modulus into its column's
/// vocabulary. `produce` runs one scan of the input on the calling thread.
/// Returns the vocabularies and the row count.
pub fn build_vocabularies<P>(produce: P, cfg: &PipelineConfig) -> Result<(VocabSet, u64)>
where
    P: FnOnce(&mut BatchFn<'_>) -> Result<u64>,
{
    cfg.validate()?;
    let (batch_rows, slots) = batching(cfg.channel_capacity);
    let m = cfg.modulus;

    thread::scope(|s| {
        let mut lanes = Vec::with_capacity(N_SPARSE);
        let mut txs: Vec<Sender<Vec<u32>>> = Vec::with_capacity(N_SPARSE);
        for _ in 0..N_SPARSE {
            let (tx, rx) = bounded::<Vec<u32>>(slots);
            txs.push(tx);
            lanes.push(s.spawn(move || {
                let mut table = VocabTable::new(m);
                for col in rx {
                    for v in col {
                        table.observe(modulus(v, m)).expect("reduced value below modulus");
                    }
                }
                table
            }));
        }

        let mut cols: Vec<Vec<u32>> = (0..N_SPARSE).map(|_| Vec::with_capacity(batch_rows)).collect();
        let flush = |cols: &mut Vec<Vec<u32>>| -> Result<()> {
            for (tx, col) in txs.iter().zip(cols.iter_mut()) {
                let full = std::mem::replace(col, Vec::with_capacity(batch_rows));
                tx.send(full).map_err(|_| Error::Disconnected("vocabulary lane"))?;
            }
            Ok(())
        };
        let scanned = produce(&mut |mut batch: &[DecodedRecord]| {
            while !batch.is_empty() {
                let take = (batch_rows - cols[0].len()).min(batch.len());
                let (head, rest) = batch.split_at(take);
                for (c, col) in cols.iter_mut().enumerate() {
                    col.extend(head.iter().map(|r| r.sparse[c]));
                }
                if cols[0].len() == batch_rows {
                    flush(&mut cols)?;
                }
                batch = rest;
            }
            Ok(())
        });
        let result = scanned.and_then(|rows| {
            if !cols[0].is_empty() {
                flush(&mut cols)?;
            }
            Ok(rows)
        });
        drop(txs);
        let tables: Vec<VocabTable> = lanes.into_iter().map(join).collect();
        result.map(|rows| (VocabSet::from_tables(tables), rows))
    })
}

struct Batch {
    seq: u64,
    first_row: u64,
    data: Vec<u32>,
}

fn run_lane(
    column: usize,
    cfg: &PipelineConfig,
    vocab: &VocabSet,
    rx: Receiver<Batch>,
    tx: Sender<Result<Batch>>,
) {
    let m = cfg.modulus;
    for mut b in rx {
        let out = match column {
            0 => Ok(()),
            c if c < FIRST_SPARSE => {
                for x in &mut b.data {
                    *x = transform_dense(*x as i32, cfg.apply_log).to_bits();
                }
                Ok(())
            }
            c => {
                let sc = c - FIRST_SPARSE;
                let table = vocab.table(sc);
                b.data.iter_mut().enumerate().try_for_each(|(i, x)| {
                    *x = table
                        .lookup(modulus(*x, m))
                        .map_err(|source| Error::Vocab {
                            row: b.first_row + i as u64,
                            column: sc,
                            source,
                        })?;
                    Ok(())
                })
            }
        };
        let failed = out.is_err();
        if tx.send(out.map(|()| b)).is_err() || failed {
            return;
        }
    }
}

/// Second pass: transforms every row with the finished vocabularies and
/// writes rows to `sink` in input order. `produce` runs one scan of the
/// input on a separate demultiplexer thread. Returns the row count.
pub fn apply_vocabularies<P, S>(
    produce: P,
    cfg: &PipelineConfig,
    vocab: &VocabSet,
    sink: &mut S,
) -> Result<u64>
where
    P: FnOnce(&mut BatchFn<'_>) -> Result<u64> + Send,
    S: RecordSink + ?Sized,
{
    cfg.validate()?;
    assert_eq!(vocab.modulus(), cfg.modulus, "vocabulary built for another modulus");
    let (batch_rows, slots) = batching(cfg.channel_capacity);

    thread::scope(|s| {
        let mut in_txs = Vec::with_capacity(N_COLUMNS);
        let mut out_rxs = Vec::with_capacity(N_COLUMNS);
        let mut lanes = Vec::with_capacity(N_COLUMNS);
        for column in 0..N_COLUMNS {
            let (in_tx, in_rx) = bounded::<Batch>(slots);
            let (out_tx, out_rx) = bounded::<Result<Batch>>(slots);
            in_txs.push(in_tx);
            out_rxs.push(out_rx);
            lanes.push(s.spawn(move || run_lane(column, cfg, vocab, in_rx, out_tx)));
        }

        let demux = s.spawn(move || {
            let mut cols: Vec<Vec<u32>> =
                (0..N_COLUMNS).map(|_| Vec::with_capacity(batch_rows)).collect();
            let mut seq = 0u64;
            let mut first_row = 0u64;
            let mut flush = |cols: &mut Vec<Vec<u32>>| -> Result<()> {
                let n = cols[0].len() as u64;
                for (tx, col) in in_txs.iter().zip(cols.iter_mut()) {
                    let data = std::mem::replace(col, Vec::with_capacity(batch_rows));
                    tx.send(Batch {
                        seq,
                        first_row,
                        data,
                    })
                    .map_err(|_| Error::Disconnected("column lane"))?;
                }
                seq += 1;
                first_row += n;
                Ok(())
            };
            let scanned = produce(&mut |mut batch: &[DecodedRecord]| {
                while !batch.is_empty() {
                    let take = (batch_rows - cols[0].len()).min(batch.len());
                    let (head, rest) = batch.split_at(take);
                    cols[0].extend(head.iter().map(|r| r.label as u32));
                    for d in 0..N_DENSE {
                        cols[FIRST_DENSE + d].extend(head.iter().map(|r| r.dense[d] as u32));
                    }
                    for c in 0..N_SPARSE {
                        cols[FIRST_SPARSE + c].extend(head.iter().map(|r| r.sparse[c]));
                    }
                    if cols[0].len() == batch_rows {
                        flush(&mut cols)?;
                    }
                    batch = rest;
                }
                Ok(())
            });
            scanned.and_then(|rows| {
                if !cols[0].is_empty() {
                    flush(&mut cols)?;
                }
                Ok(rows)
            })
        });

        let mut errors = Vec::new();
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); N_COLUMNS];
        let mut records: Vec<TransformedRecord> = Vec::new();
        let mut expect_seq = 0u64;
        loop {
            let mut ended = 0;
            for (lane, rx) in out_rxs.iter().enumerate() {
                match rx.recv() {
                    Ok(Ok(b)) => {
                        assert_eq!(b.seq, expect_seq, "lane {lane} out of sequence");
                        cols[lane] = b.data;
                    }
                    Ok(Err(e)) => errors.push(e),
                    Err(_) => ended += 1,
                }
            }
            if ended == N_COLUMNS {
                break;
            }
            if ended > 0 {
                errors.push(Error::Disconnected("column lane"));
            }
            if !errors.is_empty() {
                break;
            }
            expect_seq += 1;

            let n = cols[0].len();
            records.clear();
            records.resize(n, TransformedRecord::default());
            for (r, &l) in records.iter_mut().zip(&cols[0]) {
                r.label = l as i32;
            }
            for d in 0..N_DENSE {
                for (r, &x) in records.iter_mut().zip(&cols[FIRST_DENSE + d]) {
                    r.dense[d] = f32::from_bits(x);
                }
            }
            for c in 0..N_SPARSE {
                for (r, &x) in records.iter_mut().zip(&cols[FIRST_SPARSE + c]) {
                    r.sparse[c] = x;
                }
            }
            if let Err(e) = sink.write_batch(&records) {
                errors.push(e);
                break;
            }
        }
        drop(out_rxs);

        let rows = join(demux);
        for lane in lanes {
            join(lane);
        }
        match rows {
            Ok(rows) if errors.is_empty() => Ok(rows),
            Ok(_) => Err(Error::first_of(errors).unwrap()),
            Err(e) => {
                errors.push(e);
                Err(Error::first_of(errors).unwrap())
            }
        }
    })
}

/// Runs both passes over `src` and writes transformed rows to `sink`.
pub fn run_columnwise<R, S>(src: &R, cfg: &PipelineConfig, sink: &mut S) -> Result<RunStats>
where
    R: RecordSource + ?Sized,
    S: RecordSink + ?Sized,
{
    run_columnwise_with_vocab(src, cfg, sink).map(|(stats, _)| stats)
}

/// [`run_columnwise`], also returning the first-pass vocabularies.
pub fn run_columnwise_with_vocab<R, S>(
    src: &R,
    cfg: &PipelineConfig,
    sink: &mut S,
) -> Result<(RunStats, VocabSet)>
where
    R: RecordSource + ?Sized,
    S: RecordSink + ?Sized,
{
    cfg.validate()?;
    let width = cfg.decode_group_width;
    let mut cache: Vec<DecodedRecord> = Vec::new();

    let t0 = Instant::now();
    let (vocab, rows1) = if cfg.cache_records {
        build_vocabularies(
            |f| {
                src.scan(width, &mut |b| {
                    cache.extend_from_slice(b);
                    f(b)
                })
            },
            cfg,
        )?
    } else {
        build_vocabularies(|f| src.scan(width, f), cfg)?
    };
    let pass1 = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let rows2 = if cfg.cache_records {
        let cache = &cache;
        apply_vocabularies(
            move |f| {
                for chunk in cache.chunks(MAX_BATCH_ROWS) {
                    f(chunk)?;
                }
                Ok(cache.len() as u64)
            },
            cfg,
            &vocab,
            sink,
        )?
    } else {
        apply_vocabularies(|f| src.scan(width, f), cfg, &vocab, sink)?
    };
    let pass2 = t1.elapsed().as_secs_f64();

    if rows1 != rows2 {
        return Err(Error::PassMismatch {
            pass1: rows1,
            pass2: rows2,
        });
    }
    let stats = RunStats::new(rows1, pass1, pass2, vocab.unique_counts());
    Ok((stats, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batching_shapes() {
        assert_eq!(batching(1), (1, 1));
        assert_eq!(batching(16), (16, 1));
        assert_eq!(batching(4096), (4096, 1));
        assert_eq!(batching(65536), (4096, 16));
        assert_eq!(batching(5000), (4096, 1));
    }
}
