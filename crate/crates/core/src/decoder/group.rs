use super::{ByteToken, Decode, DecodeError, TOKENS};
use crate::schema::{ColumnKind, DatasetSchema, DecodedRecord, N_COLUMNS};

const LAST_COL: usize = N_COLUMNS - 1;
const MAX_HEX_DIGITS: usize = 8;
const MAX_MAGNITUDE: u64 = i32::MAX as u64;
const POW10: [u64; 5] = [1, 10, 100, 1_000, 10_000];

const NOT_A_DIGIT: u8 = 0xff;

const fn build_hex() -> [u8; 256] {
    let mut t = [NOT_A_DIGIT; 256];
    let mut i = 0;
    while i < 256 {
        if let Some(n) = TOKENS[i].nibble() {
            t[i] = n;
        }
        i += 1;
    }
    t
}

const fn build_dec() -> [u8; 256] {
    let mut t = [NOT_A_DIGIT; 256];
    let mut i = 0u8;
    while i < 10 {
        t[(b'0' + i) as usize] = i;
        i += 1;
    }
    t
}

static HEX: [u8; 256] = build_hex();
static DEC: [u8; 256] = build_dec();

/// Four-bytes-per-step decoder.
///
/// Each group is classified into a 4-bit delimiter mask, bit 3 for the first
/// byte, and dispatched to one of 16 cases. A case is a fixed sequence of
/// "extend the register with this run of bytes" and "close the field at this
/// delimiter" steps, so a group completes between zero and four fields and
/// leaves the trailing run in the register for the next group. In a sparse
/// column extending by a run `s0..sk` is `v << 4k | s0 << 4(k-1) | ... | sk`;
/// in decimal columns it is the base-10 analogue.
///
/// Bytes that do not fill a whole group are held until the next
/// [`feed`](Decode::feed) or flushed one at a time by
/// [`finish`](Decode::finish).
#[derive(Clone, Debug)]
pub struct GroupDecoder {
    fields: [u32; N_COLUMNS],
    col: usize,
    row: u64,
    register: u32,
    negative: bool,
    digits: usize,
    in_row: bool,
    failed: Option<DecodeError>,
    pending: [u8; 4],
    pending_len: usize,
}

impl Default for GroupDecoder {
    fn default() -> Self {
        Self::new()
    }
}

impl GroupDecoder {
    pub fn new() -> Self {
        GroupDecoder {
            fields: [0; N_COLUMNS],
            col: 0,
            row: 0,
            register: 0,
            negative: false,
            digits: 0,
            in_row: false,
            failed: None,
            pending: [0; 4],
            pending_len: 0,
        }
    }

    #[inline]
    fn delimiter_mask(g: &[u8; 4]) -> u8 {
        let d = |b: u8| TOKENS[b as usize].is_delimiter() as u8;
        (d(g[0]) << 3) | (d(g[1]) << 2) | (d(g[2]) << 1) | d(g[3])
    }

    #[inline]
    fn group<F: FnMut(DecodedRecord)>(
        &mut self,
        g: [u8; 4],
        emit: &mut F,
    ) -> Result<(), DecodeError> {
        match Self::delimiter_mask(&g) {
            // o0 = v; o1 = 0; o2 = 0; o3 = 0; v = 0
            0b1111 => {
                self.delimit(g[0], emit)?;
                self.delimit(g[1], emit)?;
                self.delimit(g[2], emit)?;
                self.delimit(g[3], emit)?;
            }
            // o0 = v; o1 = 0; o2 = 0; v = s3
            0b1110 => {
                self.delimit(g[0], emit)?;
                self.delimit(g[1], emit)?;
                self.delimit(g[2], emit)?;
                self.extend(&g[3..])?;
            }
            // o0 = v; o1 = 0; o2 = s2; v = 0
            0b1101 => {
                self.delimit(g[0], emit)?;
                self.delimit(g[1], emit)?;
                self.extend(&g[2..3])?;
                self.delimit(g[3], emit)?;
            }
            // o0 = v; o1 = s1; o2 = 0; v = 0
            0b1011 => {
                self.delimit(g[0], emit)?;
                self.extend(&g[1..2])?;
                self.delimit(g[2], emit)?;
                self.delimit(g[3], emit)?;
            }
            // o0 = v<<4 | s0; o1 = 0; o2 = 0; v = 0
            0b0111 => {
                self.extend(&g[..1])?;
                self.delimit(g[1], emit)?;
                self.delimit(g[2], emit)?;
                self.delimit(g[3], emit)?;
            }
            // o0 = v; o1 = 0; v = s2<<4 | s3
            0b1100 => {
                self.delimit(g[0], emit)?;
                self.delimit(g[1], emit)?;
                self.extend(&g[2..])?;
            }
            // o0 = v; o1 = s1; v = s3
            0b1010 => {
                self.delimit(g[0], emit)?;
                self.extend(&g[1..2])?;
                self.delimit(g[2], emit)?;
                self.extend(&g[3..])?;
            }
            // o0 = v; o1 = s1<<4 | s2; v = 0
            0b1001 => {
                self.delimit(g[0], emit)?;
                self.extend(&g[1..3])?;
                self.delimit(g[3], emit)?;
            }
            // o0 = v<<4 | s0; o1 = 0; v = s3
            0b0110 => {
                self.extend(&g[..1])?;
                self.delimit(g[1], emit)?;
                self.delimit(g[2], emit)?;
                self.extend(&g[3..])?;
            }
            // o0 = v<<4 | s0; o1 = s2; v = 0
            0b0101 => {
                self.extend(&g[..1])?;
                self.delimit(g[1], emit)?;
                self.extend(&g[2..3])?;
                self.delimit(g[3], emit)?;
            }
            // o0 = v<<8 | s0<<4 | s1; o1 = 0; v = 0
            0b0011 => {
                self.extend(&g[..2])?;
                self.delimit(g[2], emit)?;
                self.delimit(g[3], emit)?;
            }
            // o0 = v; v = s1<<8 | s2<<4 | s3
            0b1000 => {
                self.delimit(g[0], emit)?;
                self.extend(&g[1..])?;
            }
            // o0 = v<<4 | s0; v = s2<<4 | s3
            0b0100 => {
                self.extend(&g[..1])?;
                self.delimit(g[1], emit)?;
                self.extend(&g[2..])?;
            }
            // o0 = v<<8 | s0<<4 | s1; v = s3
            0b0010 => {
                self.extend(&g[..2])?;
                self.delimit(g[2], emit)?;
                self.extend(&g[3..])?;
            }
            // o0 = v<<12 | s0<<8 | s1<<4 | s2; v = 0
            0b0001 => {
                self.extend(&g[..3])?;
                self.delimit(g[3], emit)?;
            }
            // v = v<<16 | s0<<12 | s1<<8 | s2<<4 | s3
            0b0000 => self.extend(&g)?,
            _ => unreachable!("mask has four bits"),
        }
        Ok(())
    }

    /// Appends a delimiter-free run of at most four bytes to the register.
    #[inline]
    fn extend(&mut self, run: &[u8]) -> Result<(), DecodeError> {
        self.in_row = true;
        let kind = DatasetSchema::KINDS[self.col];
        if kind == ColumnKind::Sparse {
            if self.digits + run.len() <= MAX_HEX_DIGITS {
                let mut packed = 0u32;
                let mut valid = true;
                for &b in run {
                    let n = HEX[b as usize];
                    valid &= n != NOT_A_DIGIT;
                    packed = (packed << 4) | (n & 0x0f) as u32;
                }
                if valid {
                    // digits + len <= 8, so nothing is shifted out.
                    self.register = ((self.register as u64) << (4 * run.len())) as u32 | packed;
                    self.digits += run.len();
                    return Ok(());
                }
            }
        } else {
            let mut value = 0u64;
            let mut valid = true;
            for &b in run {
                let d = DEC[b as usize];
                valid &= d != NOT_A_DIGIT;
                value = value * 10 + (d & 0x0f) as u64;
            }
            if valid {
                let next = self.register as u64 * POW10[run.len()] + value;
                if next <= MAX_MAGNITUDE {
                    self.register = next as u32;
                    self.digits += run.len();
                    return Ok(());
                }
            }
        }
        // Signs, invalid bytes and overflow: resolve byte by byte so the
        // reported error is the first one in stream order.
        for &b in run {
            self.push_byte(b, kind)?;
        }
        Ok(())
    }

    fn push_byte(&mut self, b: u8, kind: ColumnKind) -> Result<(), DecodeError> {
        let (row, col) = (self.row, self.col);
        match TOKENS[b as usize] {
            ByteToken::Minus if kind.is_decimal() && self.digits == 0 && !self.negative => {
                self.negative = true;
            }
            ByteToken::Digit(d) if kind.is_decimal() => {
                let next = self.register as u64 * 10 + d as u64;
                if next > MAX_MAGNITUDE {
                    return Err(DecodeError::FieldOverflow { row, col });
                }
                self.register = next as u32;
                self.digits += 1;
            }
            ByteToken::Digit(d) | ByteToken::HexLetter(d) if kind == ColumnKind::Sparse => {
                if self.digits == MAX_HEX_DIGITS {
                    return Err(DecodeError::FieldOverflow { row, col });
                }
                self.register = (self.register << 4) | d as u32;
                self.digits += 1;
            }
            _ => return Err(DecodeError::InvalidByte { row, col, byte: b }),
        }
        Ok(())
    }

    /// Closes the current field at a tab or newline.
    #[inline]
    fn delimit<F: FnMut(DecodedRecord)>(
        &mut self,
        b: u8,
        emit: &mut F,
    ) -> Result<(), DecodeError> {
        self.fields[self.col] = if self.negative {
            self.register.wrapping_neg()
        } else {
            self.register
        };
        self.register = 0;
        self.negative = false;
        self.digits = 0;
        if b == b'\t' {
            self.in_row = true;
            if self.col == LAST_COL {
                return Err(DecodeError::Arity {
                    row: self.row,
                    fields: N_COLUMNS + 1,
                });
            }
            self.col += 1;
        } else {
            if self.col != LAST_COL {
                return Err(DecodeError::Arity {
                    row: self.row,
                    fields: self.col + 1,
                });
            }
            emit(DecodedRecord::from_field_array(&self.fields));
            self.row += 1;
            self.col = 0;
            self.in_row = false;
        }
        Ok(())
    }

    fn feed_inner<F: FnMut(DecodedRecord)>(
        &mut self,
        mut bytes: &[u8],
        emit: &mut F,
    ) -> Result<(), DecodeError> {
        if self.pending_len > 0 {
            let take = (4 - self.pending_len).min(bytes.len());
            self.pending[self.pending_len..self.pending_len + take].copy_from_slice(&bytes[..take]);
            self.pending_len += take;
            bytes = &bytes[take..];
            if self.pending_len < 4 {
                return Ok(());
            }
            self.pending_len = 0;
            self.group(self.pending, emit)?;
        }
        let mut groups = bytes.chunks_exact(4);
        for g in &mut groups {
            self.group([g[0], g[1], g[2], g[3]], emit)?;
        }
        let rest = groups.remainder();
        self.pending[..rest.len()].copy_from_slice(rest);
        self.pending_len = rest.len();
        Ok(())
    }

    fn finish_inner<F: FnMut(DecodedRecord)>(&mut self, emit: &mut F) -> Result<(), DecodeError> {
        let pending = self.pending;
        let n = self.pending_len;
        self.pending_len = 0;
        for &b in &pending[..n] {
            if TOKENS[b as usize].is_delimiter() {
                self.delimit(b, emit)?;
            } else {
                self.extend(&[b])?;
            }
        }
        if self.in_row {
            self.delimit(b'\n', emit)?;
        }
        Ok(())
    }
}

impl Decode for GroupDecoder {
    fn feed<F: FnMut(DecodedRecord)>(
        &mut self,
        bytes: &[u8],
        emit: &mut F,
    ) -> Result<(), DecodeError> {
        if let Some(e) = self.failed {
            return Err(e);
        }
        self.feed_inner(bytes, emit).inspect_err(|&e| self.failed = Some(e))
    }

    fn finish<F: FnMut(DecodedRecord)>(&mut self, emit: &mut F) -> Result<(), DecodeError> {
        if let Some(e) = self.failed {
            return Err(e);
        }
        self.finish_inner(emit).inspect_err(|&e| self.failed = Some(e))
    }

    fn rows(&self) -> u64 {
        self.row
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    /// Decoder positioned at the start of sparse column 0 of row 0.
    fn at_sparse() -> GroupDecoder {
        let mut d = GroupDecoder::new();
        // "00" label + 14 tabs: 16 bytes, four whole groups.
        let mut sink = |_r| panic!("no row expected");
        d.feed(b"00\t\t\t\t\t\t\t\t\t\t\t\t\t\t", &mut sink).unwrap();
        assert_eq!((d.col, d.pending_len, d.register), (14, 0, 0));
        d
    }

    #[test]
    fn mask_bit_order() {
        assert_eq!(GroupDecoder::delimiter_mask(b"ab\tc"), 0b0010);
        assert_eq!(GroupDecoder::delimiter_mask(b"\tabc"), 0b1000);
        assert_eq!(GroupDecoder::delimiter_mask(b"abc\n"), 0b0001);
        assert_eq!(GroupDecoder::delimiter_mask(b"\t\t\t\t"), 0b1111);
        assert_eq!(GroupDecoder::delimiter_mask(b"1234"), 0b0000);
    }

    #[test]
    fn case_0010_sparse() {
        let mut d = at_sparse();
        let mut out = Vec::new();
        d.group(*b"ab\tc", &mut |r| out.push(r)).unwrap();
        assert_eq!(d.fields[14], 0xab);
        assert_eq!(d.register, 0xc);
        assert_eq!(d.col, 15);
        assert!(out.is_empty());
    }

    #[test]
    fn case_1111_sparse() {
        let mut d = at_sparse();
        d.register = 0x1f;
        d.digits = 2;
        d.fields[15..18].copy_from_slice(&[9, 9, 9]);
        d.group(*b"\t\t\t\t", &mut |_| ()).unwrap();
        assert_eq!(&d.fields[14..18], &[0x1f, 0, 0, 0]);
        assert_eq!(d.register, 0);
        assert_eq!(d.col, 18);
    }

    #[test]
    fn case_0000_dense() {
        let mut d = GroupDecoder::new();
        // label "0" then tab: at dense column 1 with an empty register.
        d.feed(b"0\t", &mut |_| ()).unwrap();
        d.feed(b"12", &mut |_| ()).unwrap();
        // Align so the next feed starts on a group boundary.
        d.feed(b"", &mut |_| ()).unwrap();
        assert_eq!(d.pending_len, 0);
        assert_eq!((d.col, d.register), (1, 12));
        d.group(*b"1234", &mut |_| ()).unwrap();
        assert_eq!(d.register, 12 * 10_000 + 1234);
    }

    #[test]
    fn case_0000_sparse_shift() {
        let mut d = at_sparse();
        d.group(*b"dead", &mut |_| ()).unwrap();
        d.group(*b"beef", &mut |_| ()).unwrap();
        assert_eq!(d.register, 0xdead_beef);
        assert_eq!(
            d.group(*b"0000", &mut |_| ()),
            Err(DecodeError::FieldOverflow { row: 0, col: 14 })
        );
    }

    #[test]
    fn every_mask_is_reachable() {
        let mut seen = [false; 16];
        for m in 0u8..16 {
            let g: [u8; 4] =
                core::array::from_fn(|i| if m & (8 >> i) != 0 { b'\t' } else { b'1' });
            let mask = GroupDecoder::delimiter_mask(&g);
            seen[mask as usize] = true;
            let mut d = GroupDecoder::new();
            d.group(g, &mut |_| ()).unwrap();
            assert_eq!(d.col, m.count_ones() as usize);
        }
        assert!(seen.iter().all(|&s| s));
    }
}
