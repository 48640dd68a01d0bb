//! Key bit vectors and their per-coefficient slice layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of each coefficient's key slice, in coefficient order. Slice `i`
/// occupies bits `offset(i) .. offset(i) + widths[i]`, least significant
/// bit first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyLayout {
    pub widths: Vec<u32>,
}

impl KeyLayout {
    pub fn new(widths: Vec<u32>) -> Self {
        Self { widths }
    }

    pub fn total_bits(&self) -> usize {
        self.widths.iter().map(|&w| w as usize).sum()
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn offset(&self, i: usize) -> usize {
        self.widths[..i].iter().map(|&w| w as usize).sum()
    }

    /// The key-bit range of slice `i`.
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.offset(i);
        start..start + self.widths[i] as usize
    }

    /// Which slice owns key bit `bit`.
    pub fn owner(&self, bit: usize) -> Option<usize> {
        (0..self.len()).find(|&i| self.range(i).contains(&bit))
    }
}

/// A `p`-bit key; bit 0 is the least significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key {
    bits: Vec<bool>,
}

impl Key {
    pub fn zeros(p: usize) -> Self {
        Self { bits: vec![false; p] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, b: usize) -> bool {
        self.bits[b]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn set_bit(&mut self, b: usize, v: bool) {
        self.bits[b] = v;
    }

    pub fn flip(&mut self, b: usize) {
        self.bits[b] = !self.bits[b];
    }

    /// Slice `i` read as an unsigned integer.
    pub fn slice(&self, layout: &KeyLayout, i: usize) -> u64 {
        layout.range(i).enumerate().map(|(j, b)| (self.bits[b] as u64) << j).sum()
    }

    pub fn set_slice(&mut self, layout: &KeyLayout, i: usize, value: u64) {
        for (j, b) in layout.range(i).enumerate() {
            self.bits[b] = (value >> j) & 1 == 1;
        }
    }

    pub fn hamming(&self, other: &Key) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    /// Lowercase hex, `⌈p/4⌉` digits, most significant nibble first.
    pub fn to_hex(&self) -> String {
        let digits = self.bits.len().div_ceil(4);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (0..4)
                    .filter(|&j| self.bits.get(4 * d + j).copied().unwrap_or(false))
                    .map(|j| 1u32 << j)
                    .sum::<u32>();
                char::from_digit(nibble, 16).unwrap()
            })
            .collect()
    }

    /// Parses a `p`-bit key written by [`Key::to_hex`].
    pub fn from_hex(text: &str, p: usize) -> Result<Self> {
        let text = text.trim();
        let digits = p.div_ceil(4);
        if text.len() != digits {
            return Err(Error::Parse(format!("key must have {digits} hex digits, found {}", text.len())));
        }
        let mut bits = vec![false; digits * 4];
        for (pos, ch) in text.chars().enumerate() {
            let nibble = ch
                .to_digit(16)
                .filter(|_| !ch.is_ascii_uppercase())
                .ok_or_else(|| Error::Parse(format!("invalid key digit {ch:?}")))?;
            let d = digits - 1 - pos;
            for j in 0..4 {
                bits[4 * d + j] = (nibble >> j) & 1 == 1;
            }
        }
        if bits[p..].iter().any(|&b| b) {
            return Err(Error::Parse(format!("key has bits set above bit {}", p - 1)));
        }
        bits.truncate(p);
        Ok(Self { bits })
    }
}
