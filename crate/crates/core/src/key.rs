//! The 32-bit stego key.
//!
//! Byte layout, most significant first: block-grid rows, block-grid columns,
//! then 16 pattern bits. Pattern bit 0 is bit 7 of the third byte.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::error::{Error, Result};

/// Sixteen pattern bits. Index 0 is the most significant bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Pattern(u16);

impl Pattern {
    pub const LEN: usize = 16;

    pub const fn from_bits(bits: u16) -> Self {
        Pattern(bits)
    }

    pub const fn bits(self) -> u16 {
        self.0
    }

    /// Pattern bit at `index` (0..16), counting from the MSB.
    pub fn bit(self, index: usize) -> bool {
        assert!(index < Self::LEN, "pattern index {index} out of range");
        (self.0 >> (15 - index)) & 1 == 1
    }

    /// The bits as a vector of 16 booleans, MSB first.
    pub fn to_vec(self) -> Vec<bool> {
        (0..Self::LEN).map(|i| self.bit(i)).collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016b}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StegoKey {
    rows: u8,
    cols: u8,
    pattern: Pattern,
}

impl StegoKey {
    pub fn new(rows: u8, cols: u8, pattern: Pattern) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::KeyInvalid(format!(
                "grid dimensions must be non-zero (rows={rows}, cols={cols})"
            )));
        }
        Ok(StegoKey {
            rows,
            cols,
            pattern,
        })
    }

    pub fn rows(&self) -> u8 {
        self.rows
    }

    pub fn cols(&self) -> u8 {
        self.cols
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }

    /// Number of blocks in the grid, i.e. message bits one image can carry.
    pub fn block_count(&self) -> usize {
        self.rows as usize * self.cols as usize
    }

    pub fn to_bytes(&self) -> [u8; 4] {
        let [hi, lo] = self.pattern.0.to_be_bytes();
        [self.rows, self.cols, hi, lo]
    }

    pub fn from_bytes(bytes: [u8; 4]) -> Result<Self> {
        let pattern = Pattern(u16::from_be_bytes([bytes[2], bytes[3]]));
        StegoKey::new(bytes[0], bytes[1], pattern)
    }
}

/// Parses a key from its 4-byte wire form.
pub fn parse_key(bytes: &[u8]) -> Result<StegoKey> {
    let raw: [u8; 4] = bytes
        .try_into()
        .map_err(|_| Error::KeyInvalid(format!("expected 4 bytes, got {}", bytes.len())))?;
    StegoKey::from_bytes(raw)
}

pub fn serialize_key(key: &StegoKey) -> [u8; 4] {
    key.to_bytes()
}

/// Builds a key with the given geometry and 16 pattern bits drawn from `rng`.
pub fn generate_key<R: RngCore + ?Sized>(rows: u32, cols: u32, rng: &mut R) -> Result<StegoKey> {
    let check = |v: u32, what: &str| -> Result<u8> {
        match u8::try_from(v) {
            Ok(b) if b >= 1 => Ok(b),
            _ => Err(Error::KeyInvalid(format!(
                "{what} must be in 1..=255, got {v}"
            ))),
        }
    };
    let rows = check(rows, "rows")?;
    let cols = check(cols, "cols")?;
    let pattern = Pattern((rng.next_u32() >> 16) as u16);
    StegoKey::new(rows, cols, pattern)
}

impl fmt::Display for StegoKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.to_bytes() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl FromStr for StegoKey {
    type Err = Error;

    /// Accepts exactly 8 hex digits in either case.
    fn from_str(s: &str) -> Result<Self> {
        if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::KeyInvalid(format!(
                "expected 8 hex digits, got {s:?}"
            )));
        }
        let value =
            u32::from_str_radix(s, 16).map_err(|e| Error::KeyInvalid(format!("{s:?}: {e}")))?;
        StegoKey::from_bytes(value.to_be_bytes())
    }
}
