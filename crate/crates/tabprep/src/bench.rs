//! Benchmark sweep over engine, thread count, input encoding and modulus.
//!
//! Every cell is first run once and checked byte for byte against the
//! reference output (this also warms caches), then timed over several
//! repetitions whose mean is reported. Timings cover computation only: the
//! input is already in memory and output rows go to a memory buffer.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use tabprep_core::{InputEncoding, PipelineConfig, TransformedRecord, N_COLUMNS};

use crate::engine::{reference_oracle, run_columnwise, run_rowwise_baseline, RunStats};
use crate::error::Result;
use crate::io::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EngineKind {
    Columnwise,
    Rowwise,
}

impl EngineKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            EngineKind::Columnwise => "columnwise",
            EngineKind::Rowwise => "rowwise",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EngineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "columnwise" => Ok(EngineKind::Columnwise),
            "rowwise" => Ok(EngineKind::Rowwise),
            _ => Err(format!("unknown engine {s:?} (expected columnwise or rowwise)")),
        }
    }
}

/// Runs one engine over `src`. `threads` only applies to the row-wise
/// engine.
pub fn run_engine(
    engine: EngineKind,
    src: &Dataset,
    cfg: &PipelineConfig,
    threads: usize,
    sink: &mut Vec<TransformedRecord>,
) -> Result<RunStats> {
    match engine {
        EngineKind::Columnwise => run_columnwise(src, cfg, sink),
        EngineKind::Rowwise => run_rowwise_baseline(src, cfg, sink, threads),
    }
}

/// One CSV row. Times are means over the timed repetitions.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BenchRow {
    pub engine: String,
    /// Worker threads; the column-wise engine always runs one lane per
    /// column.
    pub threads: usize,
    pub encoding: String,
    pub modulus: u32,
    pub rows: u64,
    pub reps: usize,
    pub pass1_s: f64,
    pub pass2_s: f64,
    pub split_s: Option<f64>,
    pub gen_vocab_s: Option<f64>,
    pub apply_vocab_s: Option<f64>,
    pub concatenate_s: Option<f64>,
    pub rows_per_second: f64,
    pub verified: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub engines: Vec<EngineKind>,
    pub threads: Vec<usize>,
    pub encodings: Vec<InputEncoding>,
    pub moduli: Vec<u32>,
    pub reps: usize,
    /// Channel capacity, spill mode and decode width for every cell.
    pub base: PipelineConfig,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            engines: vec![EngineKind::Columnwise, EngineKind::Rowwise],
            threads: vec![1, 2, 4, 8, 16],
            encodings: vec![InputEncoding::Utf8, InputEncoding::Binary],
            moduli: vec![5000, 1_000_000],
            reps: 3,
            base: PipelineConfig::default(),
        }
    }
}

/// The sweep's cells in execution order. The column-wise engine gets a
/// single cell per encoding and modulus.
pub fn cells(spec: &BenchSpec) -> Vec<(EngineKind, usize, InputEncoding, u32)> {
    let mut out = Vec::new();
    for &m in &spec.moduli {
        for &enc in &spec.encodings {
            for &engine in &spec.engines {
                match engine {
                    EngineKind::Columnwise => out.push((engine, N_COLUMNS, enc, m)),
                    EngineKind::Rowwise => {
                        out.extend(spec.threads.iter().map(|&t| (engine, t, enc, m)))
                    }
                }
            }
        }
    }
    out
}

/// Times one cell against known-good output.
pub fn bench_cell(
    engine: EngineKind,
    threads: usize,
    src: &Dataset,
    cfg: &PipelineConfig,
    expect: &[TransformedRecord],
    reps: usize,
) -> BenchRow {
    let mut row = BenchRow {
        engine: engine.to_string(),
        threads,
        encoding: src.encoding().to_string(),
        modulus: cfg.modulus,
        rows: expect.len() as u64,
        reps,
        ..BenchRow::default()
    };
    let mut sink = Vec::with_capacity(expect.len());
    match run_engine(engine, src, cfg, threads, &mut sink) {
        Ok(_) if sink == expect => row.verified = true,
        Ok(_) => {
            row.error = Some("output differs from reference".into());
            return row;
        }
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    }

    let mut runs = Vec::with_capacity(reps);
    for _ in 0..reps {
        sink.clear();
        match run_engine(engine, src, cfg, threads, &mut sink) {
            Ok(s) => runs.push(s),
            Err(e) => {
                row.error = Some(e.to_string());
                return row;
            }
        }
    }
    let n = runs.len().max(1) as f64;
    let mean = |f: &dyn Fn(&RunStats) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let stage = |f: fn(&crate::engine::StageTimes) -> f64| {
        runs.iter()
            .map(|r| r.stages.as_ref().map(f))
            .sum::<Option<f64>>()
            .map(|s| s / n)
    };
    row.pass1_s = mean(&|r| r.pass1_seconds);
    row.pass2_s = mean(&|r| r.pass2_seconds);
    row.split_s = stage(|s| s.split);
    row.gen_vocab_s = stage(|s| s.gen_vocab);
    row.apply_vocab_s = stage(|s| s.apply_vocab);
    row.concatenate_s = stage(|s| s.concatenate);
    let total = row.pass1_s + row.pass2_s;
    row.rows_per_second = if total > 0.0 { row.rows as f64 / total } else { 0.0 };
    debug_assert!(row.rows == 0 || (row.rows_per_second * total - row.rows as f64).abs() < 1e-6 * row.rows as f64);
    row
}

/// Runs the whole sweep over a text dataset (converted to binary once for
/// the binary cells), calling `on_row` as each cell finishes.
pub fn run_bench(
    spec: &BenchSpec,
    utf8: &Dataset,
    mut on_row: impl FnMut(&BenchRow) -> Result<()>,
) -> Result<Vec<BenchRow>> {
    assert_eq!(utf8.encoding(), InputEncoding::Utf8);
    let binary = if spec.encodings.contains(&InputEncoding::Binary) {
        Some(utf8.to_binary()?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut oracle: Option<(u32, Vec<TransformedRecord>)> = None;
    for (engine, threads, enc, m) in cells(spec) {
        let cfg = PipelineConfig {
            modulus: m,
            input_encoding: enc,
            ..spec.base
        };
        if oracle.as_ref().is_none_or(|(om, _)| *om != m) {
            drop(oracle.take());
            oracle = Some((m, reference_oracle(utf8, &cfg)?));
        }
        let expect = &oracle.as_ref().unwrap().1;
        let src = match enc {
            InputEncoding::Utf8 => utf8,
            InputEncoding::Binary => binary.as_ref().unwrap(),
        };
        log::info!("bench {engine} threads={threads} {enc} M={m}");
        let row = bench_cell(engine, threads, src, &cfg, expect, spec.reps);
        on_row(&row)?;
        rows.push(row);
    }
    Ok(rows)
}

/// CSV writer for bench rows, header first.
pub fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(true).from_writer(out)
}

pub fn write_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e.into(),
        other => std::io::Error::other(format!("{other:?}")).into(),
    }
}
