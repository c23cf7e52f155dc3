//! Byte comparison of output files with a row-level difference report.

use std::fmt;
use std::path::Path;

use tabprep_core::codec::HEADER_BYTES;
use tabprep_core::RECORD_BYTES;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equal { bytes: u64 },
    Differ(Difference),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Difference {
    /// First differing byte; the shorter length when one file is a prefix
    /// of the other.
    pub offset: u64,
    /// Row holding that byte, `None` inside the header.
    pub row: Option<u64>,
    /// Field index within the row.
    pub field: Option<usize>,
    pub len_a: u64,
    pub len_b: u64,
}

impl fmt::Display for Difference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "first difference at byte {}", self.offset)?;
        match (self.row, self.field) {
            (Some(r), Some(c)) => write!(f, " (row {r}, field {c})")?,
            _ => write!(f, " (header)")?,
        }
        if self.len_a != self.len_b {
            write!(f, "; lengths {} and {}", self.len_a, self.len_b)?;
        }
        Ok(())
    }
}

pub fn compare_bytes(a: &[u8], b: &[u8]) -> Verdict {
    let offset = match a.iter().zip(b).position(|(x, y)| x != y) {
        Some(i) => i,
        None if a.len() == b.len() => {
            return Verdict::Equal {
                bytes: a.len() as u64,
            }
        }
        None => a.len().min(b.len()),
    };
    let (row, field) = match offset.checked_sub(HEADER_BYTES) {
        Some(body) => (
            Some((body / RECORD_BYTES) as u64),
            Some(body % RECORD_BYTES / 4),
        ),
        None => (None, None),
    };
    Verdict::Differ(Difference {
        offset: offset as u64,
        row,
        field,
        len_a: a.len() as u64,
        len_b: b.len() as u64,
    })
}

pub fn compare_files(a: impl AsRef<Path>, b: impl AsRef<Path>) -> Result<Verdict> {
    Ok(compare_bytes(&std::fs::read(a)?, &std::fs::read(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_and_flipped() {
        let a = vec![7u8; 24 + 3 * 160];
        assert_eq!(compare_bytes(&a, &a), Verdict::Equal { bytes: 504 });
        let mut b = a.clone();
        b[24 + 160 + 60] ^= 1;
        let Verdict::Differ(d) = compare_bytes(&a, &b) else {
            panic!()
        };
        assert_eq!((d.offset, d.row, d.field), (244, Some(1), Some(15)));
        b[3] = 0;
        let Verdict::Differ(d) = compare_bytes(&a, &b) else {
            panic!()
        };
        assert_eq!((d.offset, d.row), (3, None));
    }

    #[test]
    fn prefix() {
        let a = vec![1u8; 24 + 160];
        let Verdict::Differ(d) = compare_bytes(&a, &a[..100]) else {
            panic!()
        };
        assert_eq!((d.offset, d.row, d.len_a, d.len_b), (100, Some(0), 184, 100));
    }
}
