//! Seeded synthetic datasets shaped like the Criteo click logs.
//!
//! Label is 0 or 1. Dense values are negative (uniform in [-100, -1]) one
//! time in ten; otherwise a power of ten `10^k`, `k` uniform in 0..=6, is
//! drawn and the value is uniform in [0, 10^k], which spreads values over
//! every digit count. Sparse values are uniform 32-bit hashes printed as
//! 1 to 8 lowercase hex digits. Every non-label field is independently left
//! empty with probability `missing_prob`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabprep_core::{ConfigError, N_DENSE, N_SPARSE};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenSpec {
    pub rows: u64,
    pub seed: u64,
    pub missing_prob: f64,
}

impl GenSpec {
    pub fn new(rows: u64, seed: u64) -> Self {
        GenSpec {
            rows,
            seed,
            missing_prob: 0.0,
        }
    }

    pub fn missing(mut self, p: f64) -> Self {
        self.missing_prob = p;
        self
    }
}

/// Writes the dataset as tab-separated text.
pub fn generate<W: Write>(spec: &GenSpec, out: W) -> Result<()> {
    if !(0.0..=1.0).contains(&spec.missing_prob) {
        return Err(ConfigError::Invalid {
            field: "missing_prob",
            message: "must be within [0, 1]",
        }
        .into());
    }
    let mut out = BufWriter::with_capacity(1 << 20, out);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.missing_prob;
    let mut line = Vec::with_capacity(512);
    for _ in 0..spec.rows {
        line.clear();
        write!(line, "{}", rng.gen_range(0..=1u8))?;
        for _ in 0..N_DENSE {
            line.push(b'\t');
            if rng.gen_bool(p) {
                continue;
            }
            let v: i32 = if rng.gen_bool(0.1) {
                rng.gen_range(-100..=-1)
            } else {
                let k = rng.gen_range(0..=6u32);
                rng.gen_range(0..=10i32.pow(k))
            };
            write!(line, "{v}")?;
        }
        for _ in 0..N_SPARSE {
            line.push(b'\t');
            if rng.gen_bool(p) {
                continue;
            }
            write!(line, "{:x}", rng.gen::<u32>())?;
        }
        line.push(b'\n');
        out.write_all(&line)?;
    }
    out.flush()?;
    Ok(())
}

pub fn generate_bytes(spec: &GenSpec) -> Result<Vec<u8>> {
    let mut v = Vec::new();
    generate(spec, &mut v)?;
    Ok(v)
}

pub fn generate_file(spec: &GenSpec, path: impl AsRef<Path>) -> Result<()> {
    generate(spec, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tabprep_core::decoder::decode_scalar;

    #[test]
    fn empty_and_deterministic() {
        assert!(generate_bytes(&GenSpec::new(0, 1)).unwrap().is_empty());
        let a = generate_bytes(&GenSpec::new(200, 9).missing(0.1)).unwrap();
        assert_eq!(a, generate_bytes(&GenSpec::new(200, 9).missing(0.1)).unwrap());
        assert_ne!(a, generate_bytes(&GenSpec::new(200, 10).missing(0.1)).unwrap());
    }

    #[test]
    fn all_missing() {
        let text = generate_bytes(&GenSpec::new(50, 3).missing(1.0)).unwrap();
        for line in text.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
            assert_eq!(line.len(), 40);
            assert!(line[0] == b'0' || line[0] == b'1');
            assert!(line[1..].iter().all(|&b| b == b'\t'));
        }
    }

    #[test]
    fn decodes_within_ranges() {
        let text = generate_bytes(&GenSpec::new(2000, 5)).unwrap();
        let rows = decode_scalar(&text).unwrap();
        assert_eq!(rows.len(), 2000);
        let dense = rows.iter().flat_map(|r| r.dense);
        let (lo, hi) = dense.fold((0, 0), |(lo, hi), x| (x.min(lo), x.max(hi)));
        assert!(lo < 0 && lo >= -100);
        assert!(hi > 100_000 && hi <= 1_000_000);
        assert!(rows.iter().all(|r| r.label == 0 || r.label == 1));
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(generate_bytes(&GenSpec::new(1, 1).missing(1.5)).is_err());
    }
}
