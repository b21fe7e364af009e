//! Byte-oriented range coder with 16-bit frequency tables.
//!
//! The encoder follows the carry-propagating scheme of LZMA (33-bit `low`,
//! cache byte plus a run of pending `0xFF`s). Two changes keep streams short:
//! the always-zero leading byte is dropped, and the final interval is closed
//! on the value with the most trailing zero bytes, which are then trimmed.
//! The decoder reads zeros past the end of its input.

use crate::error::{Error, Result};

/// Frequencies sum to `1 << PROB_BITS`.
pub const PROB_BITS: u32 = 16;
pub const PROB_TOTAL: u32 = 1 << PROB_BITS;
const TOP: u32 = 1 << 24;

#[derive(Debug)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut pending = self.cache;
            loop {
                self.out.push(pending.wrapping_add(carry));
                pending = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    fn normalize(&mut self) {
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    /// Codes the sub-interval `[cum, cum + freq)` of `[0, 2^16)`.
    pub fn encode(&mut self, cum: u32, freq: u32) {
        debug_assert!(freq > 0 && cum + freq <= PROB_TOTAL);
        let r = self.range >> PROB_BITS;
        self.low += r as u64 * cum as u64;
        self.range = r * freq;
        self.normalize();
    }

    /// Codes `bits` (at most 16) equiprobable bits.
    pub fn encode_bits(&mut self, value: u32, bits: u32) {
        debug_assert!(bits <= 16 && (bits == 32 || value >> bits == 0));
        if bits == 0 {
            return;
        }
        let r = self.range >> bits;
        self.low += r as u64 * value as u64;
        self.range = r;
        self.normalize();
    }

    pub fn finish(mut self) -> Vec<u8> {
        // Close on the point of [low, low + range) with the most trailing zeros.
        let end = self.low + self.range as u64;
        for zero_bits in (0..=32).rev().step_by(8) {
            let mask = (1u64 << zero_bits) - 1;
            let v = (self.low + mask) & !mask;
            if v < end {
                self.low = v;
                break;
            }
        }
        for _ in 0..5 {
            self.shift_low();
        }
        let mut out = self.out;
        // The first byte is the integer part of a value in [0, 1): always zero.
        debug_assert_eq!(out.first(), Some(&0));
        out.remove(0);
        while out.last() == Some(&0) {
            out.pop();
        }
        out
    }
}

#[derive(Debug)]
pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u32,
    range: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        let mut d = Self {
            data,
            pos: 0,
            code: 0,
            range: u32::MAX,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next_byte() as u32;
        }
        d
    }

    fn next_byte(&mut self) -> u8 {
        let b = self.data.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    fn normalize(&mut self) {
        while self.range < TOP {
            self.code = (self.code << 8) | self.next_byte() as u32;
            self.range <<= 8;
        }
    }

    /// Position within `[0, 2^16)` of the next symbol.
    pub fn target(&self) -> Result<u32> {
        let r = self.range >> PROB_BITS;
        let t = self.code / r;
        if t >= PROB_TOTAL {
            return Err(Error::CorruptStream("range decoder left its interval".into()));
        }
        Ok(t)
    }

    /// Removes the interval of the symbol identified from [`Self::target`].
    pub fn consume(&mut self, cum: u32, freq: u32) {
        let r = self.range >> PROB_BITS;
        self.code -= r * cum;
        self.range = r * freq;
        self.normalize();
    }

    pub fn decode_bits(&mut self, bits: u32) -> Result<u32> {
        if bits == 0 {
            return Ok(0);
        }
        let r = self.range >> bits;
        let v = self.code / r;
        if v >> bits != 0 {
            return Err(Error::CorruptStream("range decoder left its interval".into()));
        }
        self.code -= r * v;
        self.range = r;
        self.normalize();
        Ok(v)
    }

    /// Verifies that the stream was consumed exactly (no trailing bytes).
    pub fn finish(self) -> Result<()> {
        if self.pos < self.data.len() {
            return Err(Error::CorruptStream(format!(
                "{} trailing bytes after the last symbol",
                self.data.len() - self.pos
            )));
        }
        Ok(())
    }
}
