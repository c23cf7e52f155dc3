use super::{Decode, DecodeError, ByteToken, TOKENS};
use crate::schema::{ColumnKind, DatasetSchema, DecodedRecord, N_COLUMNS};

const LAST_COL: usize = N_COLUMNS - 1;
const MAX_HEX_DIGITS: u8 = 8;
const MAX_MAGNITUDE: u32 = i32::MAX as u32;

/// Byte-at-a-time decoder; one state transition per input byte.
#[derive(Clone, Debug)]
pub struct ScalarDecoder {
    fields: [u32; N_COLUMNS],
    col: usize,
    row: u64,
    /// Accumulated magnitude of the current field.
    register: u32,
    negative: bool,
    digits: u8,
    /// Bytes seen since the last newline.
    in_row: bool,
    failed: Option<DecodeError>,
}

impl Default for ScalarDecoder {
    fn default() -> Self {
        Self::new()
    }
}

impl ScalarDecoder {
    pub fn new() -> Self {
        ScalarDecoder {
            fields: [0; N_COLUMNS],
            col: 0,
            row: 0,
            register: 0,
            negative: false,
            digits: 0,
            in_row: false,
            failed: None,
        }
    }

    fn close_field(&mut self) {
        self.fields[self.col] = if self.negative {
            self.register.wrapping_neg()
        } else {
            self.register
        };
        self.register = 0;
        self.negative = false;
        self.digits = 0;
    }

    fn step<F: FnMut(DecodedRecord)>(&mut self, b: u8, emit: &mut F) -> Result<(), DecodeError> {
        let kind = DatasetSchema::KINDS[self.col];
        let (row, col) = (self.row, self.col);
        self.in_row = true;
        match TOKENS[b as usize] {
            ByteToken::Tab => {
                self.close_field();
                if self.col == LAST_COL {
                    return Err(DecodeError::Arity {
                        row,
                        fields: N_COLUMNS + 1,
                    });
                }
                self.col += 1;
            }
            ByteToken::Newline => {
                self.close_field();
                if self.col != LAST_COL {
                    return Err(DecodeError::Arity {
                        row,
                        fields: self.col + 1,
                    });
                }
                emit(DecodedRecord::from_field_array(&self.fields));
                self.row += 1;
                self.col = 0;
                self.in_row = false;
            }
            ByteToken::Minus if kind.is_decimal() && self.digits == 0 && !self.negative => {
                self.negative = true;
            }
            ByteToken::Digit(d) if kind.is_decimal() => {
                let next = self.register as u64 * 10 + d as u64;
                if next > MAX_MAGNITUDE as u64 {
                    return Err(DecodeError::FieldOverflow { row, col });
                }
                self.register = next as u32;
                self.digits = self.digits.saturating_add(1);
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
}

impl Decode for ScalarDecoder {
    fn feed<F: FnMut(DecodedRecord)>(
        &mut self,
        bytes: &[u8],
        emit: &mut F,
    ) -> Result<(), DecodeError> {
        if let Some(e) = self.failed {
            return Err(e);
        }
        for &b in bytes {
            if let Err(e) = self.step(b, emit) {
                self.failed = Some(e);
                return Err(e);
            }
        }
        Ok(())
    }

    fn finish<F: FnMut(DecodedRecord)>(&mut self, emit: &mut F) -> Result<(), DecodeError> {
        if let Some(e) = self.failed {
            return Err(e);
        }
        if self.in_row {
            if let Err(e) = self.step(b'\n', emit) {
                self.failed = Some(e);
                return Err(e);
            }
        }
        Ok(())
    }

    fn rows(&self) -> u64 {
        self.row
    }
}
