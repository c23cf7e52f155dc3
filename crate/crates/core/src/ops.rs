//! Per-value transforms and the per-column vocabulary.
//!
//! Missing-value filling and hex-to-integer conversion have no code here:
//! the decoders already produce 0 for empty fields and binary values for hex
//! text.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Clamps negative dense values to zero.
#[inline]
pub fn neg2zero(x: i32) -> i32 {
    if x < 0 {
        0
    } else {
        x
    }
}

/// `ln(x + 1)` rounded to `f32`. `x` must already be non-negative.
#[inline]
pub fn logarithm(x: i32) -> f32 {
    assert!(x >= 0, "logarithm expects a non-negative input, got {x}");
    libm::log(x as f64 + 1.0) as f32
}

/// Non-negative residue of a sparse hash.
#[inline]
pub fn modulus(v: u32, m: u32) -> u32 {
    v % m
}

/// Full dense pipeline: clamp, then optionally `ln(x + 1)`.
#[inline]
pub fn transform_dense(x: i32, apply_log: bool) -> f32 {
    let x = neg2zero(x);
    if apply_log {
        logarithm(x)
    } else {
        x as f32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observation {
    Inserted,
    Seen,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VocabError {
    OutOfRange { value: u32, modulus: u32 },
    /// Second-pass value never observed in the first pass.
    MissingEntry { value: u32 },
    /// Serialized table failed validation.
    Corrupt(&'static str),
}

impl fmt::Display for VocabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VocabError::OutOfRange { value, modulus } => {
                write!(f, "value {value} outside vocabulary range 0..{modulus}")
            }
            VocabError::MissingEntry { value } => {
                write!(f, "value {value} has no vocabulary entry (pass inputs differ)")
            }
            VocabError::Corrupt(what) => write!(f, "corrupt vocabulary: {what}"),
        }
    }
}

impl core::error::Error for VocabError {}

pub const VOCAB_MAGIC: [u8; 4] = *b"PVOC";
pub const VOCAB_VERSION: u32 = 1;
pub const VOCAB_HEADER_BYTES: usize = 16;

/// Vocabulary of one sparse column over `0..modulus`.
///
/// Ids are handed out from 0 in first-observation order, so after any
/// sequence of observations the ids of present values are exactly
/// `0..unique_count()`. Memory is `modulus * 4 + modulus / 8` bytes
/// regardless of how many values are present.
#[derive(Clone, PartialEq, Eq)]
pub struct VocabTable {
    modulus: u32,
    present: Vec<u64>,
    id_of: Vec<u32>,
    next_id: u32,
}

impl fmt::Debug for VocabTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VocabTable")
            .field("modulus", &self.modulus)
            .field("unique", &self.next_id)
            .finish()
    }
}

impl VocabTable {
    /// Panics if `modulus == 0`.
    pub fn new(modulus: u32) -> Self {
        assert!(modulus >= 1, "modulus must be ≥ 1");
        let m = modulus as usize;
        VocabTable {
            modulus,
            present: vec![0; m.div_ceil(64)],
            id_of: vec![0; m],
            next_id: 0,
        }
    }

    #[inline]
    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    #[inline]
    pub fn unique_count(&self) -> u32 {
        self.next_id
    }

    #[inline]
    pub fn contains(&self, v: u32) -> bool {
        v < self.modulus && self.present[(v >> 6) as usize] & (1 << (v & 63)) != 0
    }

    /// First pass: assigns the next id to `v` the first time it is seen.
    #[inline]
    pub fn observe(&mut self, v: u32) -> Result<Observation, VocabError> {
        if v >= self.modulus {
            return Err(VocabError::OutOfRange {
                value: v,
                modulus: self.modulus,
            });
        }
        let word = &mut self.present[(v >> 6) as usize];
        let bit = 1u64 << (v & 63);
        if *word & bit != 0 {
            return Ok(Observation::Seen);
        }
        *word |= bit;
        self.id_of[v as usize] = self.next_id;
        self.next_id += 1;
        Ok(Observation::Inserted)
    }

    /// Second pass: the id assigned to `v`.
    #[inline]
    pub fn lookup(&self, v: u32) -> Result<u32, VocabError> {
        if self.contains(v) {
            Ok(self.id_of[v as usize])
        } else {
            Err(VocabError::MissingEntry { value: v })
        }
    }

    /// Values in id order.
    pub fn values_by_id(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.next_id as usize];
        for (w, &word) in self.present.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let v = (w as u32) * 64 + bits.trailing_zeros();
                out[self.id_of[v as usize] as usize] = v;
                bits &= bits - 1;
            }
        }
        out
    }

    /// Bytes of memory held by the table's arrays.
    pub fn heap_bytes(&self) -> usize {
        self.present.len() * 8 + self.id_of.len() * 4
    }

    /// Appends the sidecar encoding: `"PVOC"`, version, modulus, count, then
    /// `(value, id)` pairs in id order; all fields little-endian `u32`.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.reserve(VOCAB_HEADER_BYTES + self.next_id as usize * 8);
        out.extend_from_slice(&VOCAB_MAGIC);
        out.extend_from_slice(&VOCAB_VERSION.to_le_bytes());
        out.extend_from_slice(&self.modulus.to_le_bytes());
        out.extend_from_slice(&self.next_id.to_le_bytes());
        for (id, v) in self.values_by_id().into_iter().enumerate() {
            out.extend_from_slice(&v.to_le_bytes());
            out.extend_from_slice(&(id as u32).to_le_bytes());
        }
    }

    /// Parses one sidecar table from the front of `bytes`, returning it and
    /// the number of bytes consumed.
    pub fn decode_from(bytes: &[u8]) -> Result<(Self, usize), VocabError> {
        let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if bytes.len() < VOCAB_HEADER_BYTES {
            return Err(VocabError::Corrupt("truncated header"));
        }
        if bytes[..4] != VOCAB_MAGIC {
            return Err(VocabError::Corrupt("bad magic"));
        }
        if u32_at(4) != VOCAB_VERSION {
            return Err(VocabError::Corrupt("unsupported version"));
        }
        let modulus = u32_at(8);
        let count = u32_at(12);
        if modulus == 0 || count > modulus {
            return Err(VocabError::Corrupt("count exceeds modulus"));
        }
        let len = VOCAB_HEADER_BYTES + count as usize * 8;
        if bytes.len() < len {
            return Err(VocabError::Corrupt("truncated entries"));
        }
        let mut table = VocabTable::new(modulus);
        for i in 0..count as usize {
            let off = VOCAB_HEADER_BYTES + i * 8;
            let (value, id) = (u32_at(off), u32_at(off + 4));
            if id != i as u32 {
                return Err(VocabError::Corrupt("ids not contiguous"));
            }
            if table.observe(value)? == Observation::Seen {
                return Err(VocabError::Corrupt("duplicate value"));
            }
        }
        Ok((table, len))
    }
}
