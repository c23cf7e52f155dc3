//! The two engines: the column-wise pipeline and the row-wise baseline, plus
//! the single-threaded reference used to check them.

mod columnwise;
mod merge;
mod oracle;
mod rowwise;

use std::path::Path;

use tabprep_core::{VocabError, VocabTable, N_SPARSE};

use crate::error::{Error, Result};

pub use columnwise::{
    apply_vocabularies, batching, build_vocabularies, run_columnwise, run_columnwise_with_vocab,
};
pub use merge::{merge_subvocabs, MergeError, SubVocab, SubVocabBuilder};
pub use oracle::{reference_oracle, reference_vocabularies};
pub use rowwise::run_rowwise_baseline;

/// Wall-clock seconds spent in each row-wise stage.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimes {
    pub split: f64,
    pub gen_vocab: f64,
    pub apply_vocab: f64,
    pub concatenate: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunStats {
    pub rows_processed: u64,
    pub pass1_seconds: f64,
    pub pass2_seconds: f64,
    /// Row-wise engine only.
    pub stages: Option<StageTimes>,
    pub rows_per_second: f64,
    pub unique_counts: [u32; N_SPARSE],
}

impl RunStats {
    pub fn new(rows: u64, pass1: f64, pass2: f64, unique_counts: [u32; N_SPARSE]) -> Self {
        let total = pass1 + pass2;
        RunStats {
            rows_processed: rows,
            pass1_seconds: pass1,
            pass2_seconds: pass2,
            stages: None,
            rows_per_second: if total > 0.0 { rows as f64 / total } else { 0.0 },
            unique_counts,
        }
    }

    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> = [
            "rows_processed",
            "pass1_seconds",
            "pass2_seconds",
            "split_seconds",
            "gen_vocab_seconds",
            "apply_vocab_seconds",
            "concatenate_seconds",
            "rows_per_second",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((0..N_SPARSE).map(|c| format!("unique_c{c}")));
        h
    }

    /// One CSV row matching [`csv_header`](Self::csv_header); stage columns
    /// are empty for the column-wise engine.
    pub fn csv_record(&self) -> Vec<String> {
        let stage = |f: fn(&StageTimes) -> f64| {
            self.stages.as_ref().map(|s| f(s).to_string()).unwrap_or_default()
        };
        let mut r = vec![
            self.rows_processed.to_string(),
            self.pass1_seconds.to_string(),
            self.pass2_seconds.to_string(),
            stage(|s| s.split),
            stage(|s| s.gen_vocab),
            stage(|s| s.apply_vocab),
            stage(|s| s.concatenate),
            self.rows_per_second.to_string(),
        ];
        r.extend(self.unique_counts.iter().map(|c| c.to_string()));
        r
    }
}

/// The 26 per-column vocabularies built by the first pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VocabSet {
    tables: Vec<VocabTable>,
}

impl VocabSet {
    pub fn new(modulus: u32) -> Self {
        VocabSet {
            tables: (0..N_SPARSE).map(|_| VocabTable::new(modulus)).collect(),
        }
    }

    pub fn from_tables(tables: Vec<VocabTable>) -> Self {
        assert_eq!(tables.len(), N_SPARSE);
        VocabSet { tables }
    }

    pub fn modulus(&self) -> u32 {
        self.tables[0].modulus()
    }

    pub fn table(&self, column: usize) -> &VocabTable {
        &self.tables[column]
    }

    pub fn tables(&self) -> &[VocabTable] {
        &self.tables
    }

    pub fn unique_counts(&self) -> [u32; N_SPARSE] {
        std::array::from_fn(|c| self.tables[c].unique_count())
    }

    pub fn heap_bytes(&self) -> usize {
        self.tables.iter().map(VocabTable::heap_bytes).sum()
    }

    /// Sidecar file contents: the 26 encoded tables back to back.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for t in &self.tables {
            t.encode_into(&mut out);
        }
        out
    }

    pub fn decode(mut bytes: &[u8]) -> Result<Self> {
        let mut tables = Vec::with_capacity(N_SPARSE);
        for column in 0..N_SPARSE {
            let (t, used) = VocabTable::decode_from(bytes).map_err(|source| Error::Vocab {
                row: 0,
                column,
                source,
            })?;
            tables.push(t);
            bytes = &bytes[used..];
        }
        if !bytes.is_empty() {
            return Err(Error::Vocab {
                row: 0,
                column: N_SPARSE - 1,
                source: VocabError::Corrupt("trailing bytes"),
            });
        }
        Ok(VocabSet { tables })
    }

    pub fn write_sidecar(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read_sidecar(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}
