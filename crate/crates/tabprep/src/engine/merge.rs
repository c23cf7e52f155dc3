//! Sub-dictionaries built by row-wise workers and their merge into one
//! vocabulary per column.

use hashbrown::HashMap;
use tabprep_core::VocabTable;

/// Values first seen in one contiguous chunk of rows, for one column.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SubVocab {
    pub chunk_index: usize,
    /// `(value, local first-appearance ordinal)`.
    pub entries: Vec<(u32, u32)>,
}

impl SubVocab {
    pub fn new(chunk_index: usize) -> Self {
        SubVocab {
            chunk_index,
            entries: Vec::new(),
        }
    }
}

/// Builds a [`SubVocab`] incrementally.
#[derive(Debug, Default)]
pub struct SubVocabBuilder {
    seen: HashMap<u32, u32>,
    entries: Vec<(u32, u32)>,
}

impl SubVocabBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn observe(&mut self, v: u32) {
        let next = self.entries.len() as u32;
        if let hashbrown::hash_map::Entry::Vacant(e) = self.seen.entry(v) {
            e.insert(next);
            self.entries.push((v, next));
        }
    }

    pub fn finish(self, chunk_index: usize) -> SubVocab {
        SubVocab {
            chunk_index,
            entries: self.entries,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MergeError {
    #[error("chunk {chunk_index} lists value {value} twice")]
    DuplicateWithinPart { chunk_index: usize, value: u32 },
    #[error("chunk {chunk_index} out of order")]
    UnsortedParts { chunk_index: usize },
    #[error("value {value} not below modulus {modulus}")]
    OutOfRange { value: u32, modulus: u32 },
}

/// Merges one column's sub-dictionaries, given in chunk order, into a single
/// table. A value's id is the rank of its earliest `(chunk, ordinal)`, which
/// is its global first-appearance order.
pub fn merge_subvocabs(parts: &[SubVocab], modulus: u32) -> Result<VocabTable, MergeError> {
    let mut table = VocabTable::new(modulus);
    let mut stamp = vec![0u32; modulus as usize];
    let mut prev: Option<usize> = None;
    let mut order = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        if prev.is_some_and(|p| p >= part.chunk_index) {
            return Err(MergeError::UnsortedParts {
                chunk_index: part.chunk_index,
            });
        }
        prev = Some(part.chunk_index);
        let tag = i as u32 + 1;

        let entries: &[(u32, u32)] = if part.entries.is_sorted_by_key(|e| e.1) {
            &part.entries
        } else {
            order.clear();
            order.extend_from_slice(&part.entries);
            order.sort_by_key(|e| e.1);
            &order
        };
        for &(value, _) in entries {
            if value >= modulus {
                return Err(MergeError::OutOfRange { value, modulus });
            }
            let s = &mut stamp[value as usize];
            if *s == tag {
                return Err(MergeError::DuplicateWithinPart {
                    chunk_index: part.chunk_index,
                    value,
                });
            }
            *s = tag;
            table
                .observe(value)
                .expect("value checked against modulus");
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(chunk_index: usize, entries: &[(u32, u32)]) -> SubVocab {
        SubVocab {
            chunk_index,
            entries: entries.to_vec(),
        }
    }

    #[test]
    fn two_chunks() {
        let t = merge_subvocabs(
            &[part(0, &[(7, 0), (3, 1)]), part(1, &[(3, 0), (9, 1)])],
            16,
        )
        .unwrap();
        assert_eq!(t.lookup(7), Ok(0));
        assert_eq!(t.lookup(3), Ok(1));
        assert_eq!(t.lookup(9), Ok(2));
        assert_eq!(t.unique_count(), 3);
    }

    #[test]
    fn single_part_keeps_ordinals() {
        let t = merge_subvocabs(&[part(4, &[(5, 1), (2, 0), (8, 2)])], 10).unwrap();
        assert_eq!(t.values_by_id(), vec![2, 5, 8]);
    }

    #[test]
    fn empty() {
        assert_eq!(merge_subvocabs(&[], 10).unwrap().unique_count(), 0);
    }

    #[test]
    fn rejects_bad_parts() {
        assert_eq!(
            merge_subvocabs(&[part(0, &[(1, 0), (1, 1)])], 10).unwrap_err(),
            MergeError::DuplicateWithinPart {
                chunk_index: 0,
                value: 1
            }
        );
        assert_eq!(
            merge_subvocabs(&[part(1, &[]), part(0, &[])], 10).unwrap_err(),
            MergeError::UnsortedParts { chunk_index: 0 }
        );
        assert!(matches!(
            merge_subvocabs(&[part(0, &[(10, 0)])], 10),
            Err(MergeError::OutOfRange { .. })
        ));
    }

    #[test]
    fn builder_records_first_appearance() {
        let mut b = SubVocabBuilder::new();
        for v in [4, 4, 1, 4, 0, 1] {
            b.observe(v);
        }
        assert_eq!(b.finish(2), part(2, &[(4, 0), (1, 1), (0, 2)]));
    }
}
