//! Dataset layout, record types and pipeline configuration.

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

/// Dense (decimal) feature columns per row.
pub const N_DENSE: usize = 13;
/// Sparse (hex hash) feature columns per row.
pub const N_SPARSE: usize = 26;
/// Label + dense + sparse.
pub const N_COLUMNS: usize = 1 + N_DENSE + N_SPARSE;
/// Packed size of one record, 40 little-endian 32-bit fields.
pub const RECORD_BYTES: usize = N_COLUMNS * 4;

/// Index of the first dense column in a raw row.
pub const FIRST_DENSE: usize = 1;
/// Index of the first sparse column in a raw row.
pub const FIRST_SPARSE: usize = 1 + N_DENSE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    /// Signed decimal, passed through untransformed.
    Label,
    /// Signed decimal.
    Dense,
    /// Unsigned lowercase hex, at most 8 digits.
    Sparse,
}

impl ColumnKind {
    /// Whether the column text is decimal (and may carry a leading minus).
    #[inline]
    pub const fn is_decimal(self) -> bool {
        !matches!(self, ColumnKind::Sparse)
    }
}

const fn build_kinds() -> [ColumnKind; N_COLUMNS] {
    let mut kinds = [ColumnKind::Sparse; N_COLUMNS];
    kinds[0] = ColumnKind::Label;
    let mut i = FIRST_DENSE;
    while i < FIRST_SPARSE {
        kinds[i] = ColumnKind::Dense;
        i += 1;
    }
    kinds
}

/// The fixed Criteo layout: label, 13 dense, 26 sparse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DatasetSchema;

impl DatasetSchema {
    pub const N_DENSE: usize = N_DENSE;
    pub const N_SPARSE: usize = N_SPARSE;
    pub const HAS_LABEL: bool = true;
    pub const KINDS: [ColumnKind; N_COLUMNS] = build_kinds();

    #[inline]
    pub const fn column_count(self) -> usize {
        N_COLUMNS
    }

    /// Kind of raw column `index`; panics when `index >= 40`.
    #[inline]
    pub const fn column_kind(self, index: usize) -> ColumnKind {
        Self::KINDS[index]
    }
}

/// Error for building a record from a field slice of the wrong length.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArityMismatch {
    pub expected: usize,
    pub found: usize,
}

impl fmt::Display for ArityMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expected {} fields, found {}", self.expected, self.found)
    }
}

impl core::error::Error for ArityMismatch {}

/// One parsed input row. Missing fields are 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct DecodedRecord {
    pub label: i32,
    pub dense: [i32; N_DENSE],
    pub sparse: [u32; N_SPARSE],
}

impl DecodedRecord {
    /// Builds a record from the 40 raw 32-bit fields in column order.
    /// Dense and label fields are reinterpreted as two's complement.
    pub fn from_fields(fields: &[u32]) -> Result<Self, ArityMismatch> {
        let fields: &[u32; N_COLUMNS] = fields.try_into().map_err(|_| ArityMismatch {
            expected: N_COLUMNS,
            found: fields.len(),
        })?;
        Ok(Self::from_field_array(fields))
    }

    #[inline]
    pub fn from_field_array(fields: &[u32; N_COLUMNS]) -> Self {
        let mut rec = DecodedRecord {
            label: fields[0] as i32,
            ..Default::default()
        };
        for (d, &f) in rec.dense.iter_mut().zip(&fields[FIRST_DENSE..FIRST_SPARSE]) {
            *d = f as i32;
        }
        rec.sparse.copy_from_slice(&fields[FIRST_SPARSE..]);
        rec
    }

    /// The 40 raw fields in column order.
    pub fn fields(&self) -> [u32; N_COLUMNS] {
        let mut out = [0u32; N_COLUMNS];
        out[0] = self.label as u32;
        for (o, &d) in out[FIRST_DENSE..FIRST_SPARSE].iter_mut().zip(&self.dense) {
            *o = d as u32;
        }
        out[FIRST_SPARSE..].copy_from_slice(&self.sparse);
        out
    }
}

/// One output row: label passthrough, transformed dense values and
/// vocabulary ids.
///
/// Equality is bitwise on the dense floats so that records compare the same
/// way their packed bytes do.
#[derive(Clone, Copy, Debug, Default)]
pub struct TransformedRecord {
    pub label: i32,
    pub dense: [f32; N_DENSE],
    pub sparse: [u32; N_SPARSE],
}

impl PartialEq for TransformedRecord {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.sparse == other.sparse
            && self
                .dense
                .iter()
                .zip(&other.dense)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Eq for TransformedRecord {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum InputEncoding {
    /// Tab-separated ASCII text.
    #[default]
    Utf8,
    /// Pre-decoded fixed-width records.
    Binary,
}

impl InputEncoding {
    pub const fn as_str(self) -> &'static str {
        match self {
            InputEncoding::Utf8 => "utf8",
            InputEncoding::Binary => "binary",
        }
    }

    pub const fn code(self) -> u8 {
        match self {
            InputEncoding::Utf8 => 0,
            InputEncoding::Binary => 1,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(InputEncoding::Utf8),
            1 => Some(InputEncoding::Binary),
            _ => None,
        }
    }
}

impl fmt::Display for InputEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InputEncoding {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "utf8" | "utf-8" | "text" | "tsv" => Ok(InputEncoding::Utf8),
            "binary" | "bin" => Ok(InputEncoding::Binary),
            _ => Err(ConfigError::bad_value("input_encoding", s)),
        }
    }
}

/// Where the row-wise engine keeps intermediate results between stages.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SpillMode {
    #[default]
    Memory,
    Disk,
}

impl SpillMode {
    pub const fn as_str(self) -> &'static str {
        match self {
            SpillMode::Memory => "memory",
            SpillMode::Disk => "disk",
        }
    }
}

impl fmt::Display for SpillMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpillMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "memory" | "mem" => Ok(SpillMode::Memory),
            "disk" => Ok(SpillMode::Disk),
            _ => Err(ConfigError::bad_value("intermediate_spill", s)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigError {
    /// A field holds a value outside its allowed range.
    Invalid {
        field: &'static str,
        message: &'static str,
    },
    /// A textual value could not be parsed.
    BadValue { field: String, value: String },
    UnknownKey(String),
    /// A config-file line that is not `key = value`.
    Syntax { line: usize },
}

impl ConfigError {
    fn bad_value(field: &str, value: &str) -> Self {
        ConfigError::BadValue {
            field: field.to_string(),
            value: value.to_string(),
        }
    }

    /// Name of the offending field, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            ConfigError::BadValue { field, .. } => Some(field),
            ConfigError::UnknownKey(k) => Some(k),
            ConfigError::Syntax { .. } => None,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Invalid { field, message } => write!(f, "{field}: {message}"),
            ConfigError::BadValue { field, value } => {
                write!(f, "{field}: cannot parse value {value:?}")
            }
            ConfigError::UnknownKey(k) => write!(f, "unknown config key {k:?}"),
            ConfigError::Syntax { line } => {
                write!(f, "line {line}: expected `key = value`")
            }
        }
    }
}

impl core::error::Error for ConfigError {}

pub const DEFAULT_MODULUS: u32 = 5000;
pub const LARGE_MODULUS: u32 = 1_000_000;
pub const DEFAULT_CHANNEL_CAPACITY: usize = 65_536;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Sparse values are reduced modulo this before vocabulary lookup.
    pub modulus: u32,
    /// Bytes consumed per decoder step: 1 (scalar) or 4 (grouped).
    pub decode_group_width: usize,
    /// Records in flight per inter-stage FIFO.
    pub channel_capacity: usize,
    pub rowwise_threads: usize,
    pub input_encoding: InputEncoding,
    pub intermediate_spill: SpillMode,
    pub apply_log: bool,
    /// Keep decoded records between passes instead of re-reading the input.
    pub cache_records: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            modulus: DEFAULT_MODULUS,
            decode_group_width: 4,
            channel_capacity: DEFAULT_CHANNEL_CAPACITY,
            rowwise_threads: 4,
            input_encoding: InputEncoding::Utf8,
            intermediate_spill: SpillMode::Memory,
            apply_log: true,
            cache_records: false,
        }
    }
}

impl PipelineConfig {
    /// Returns the config unchanged if every invariant holds, otherwise the
    /// first violation in field order.
    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.modulus < 1 {
            return Err(ConfigError::Invalid {
                field: "modulus",
                message: "modulus must be ≥ 1",
            });
        }
        if !matches!(self.decode_group_width, 1 | 4) {
            return Err(ConfigError::Invalid {
                field: "decode_group_width",
                message: "unsupported group width (expected 1 or 4)",
            });
        }
        if self.channel_capacity < 1 {
            return Err(ConfigError::Invalid {
                field: "channel_capacity",
                message: "channel capacity must be ≥ 1",
            });
        }
        if self.rowwise_threads < 1 {
            return Err(ConfigError::Invalid {
                field: "rowwise_threads",
                message: "thread count must be ≥ 1",
            });
        }
        Ok(self)
    }

    /// Sets one field from its textual `key = value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse().map_err(|_| ConfigError::bad_value(key, value))
        }
        fn flag(key: &str, value: &str) -> Result<bool, ConfigError> {
            match value {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(ConfigError::bad_value(key, value)),
            }
        }
        match key {
            "modulus" => self.modulus = num(key, value)?,
            "decode_group_width" => self.decode_group_width = num(key, value)?,
            "channel_capacity" => self.channel_capacity = num(key, value)?,
            "rowwise_threads" | "threads" => self.rowwise_threads = num(key, value)?,
            "input_encoding" | "encoding" => self.input_encoding = value.parse()?,
            "intermediate_spill" | "spill" => self.intermediate_spill = value.parse()?,
            "apply_log" => self.apply_log = flag(key, value)?,
            "cache_records" => self.cache_records = flag(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies a `key = value` text on top of `self`. Blank lines and lines
    /// starting with `#` are skipped. The result is not validated.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }
}

/// Free-function form of [`PipelineConfig::validate`].
pub fn validate_config(cfg: PipelineConfig) -> Result<PipelineConfig, ConfigError> {
    cfg.validate()
}
