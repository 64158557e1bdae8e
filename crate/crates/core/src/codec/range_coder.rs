//! Carry-propagating range coder with 16-bit frequencies (LZMA layout:
//! 64-bit `low`, 32-bit `range`, one cached byte plus a run of pending 0xFF).

use super::BitstreamError;
use crate::entropy::{CdfRow, FREQ_BITS};

const TOP: u32 = 1 << 24;

/// Largest Exp-Golomb prefix accepted on decode.
const MAX_EG_BITS: u32 = 32;

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
        RangeEncoder {
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
            let mut temp = self.cache;
            loop {
                self.out.push(temp.wrapping_add(carry));
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
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

    /// Code the interval `[cum, cum + freq)` out of `1 << FREQ_BITS`.
    pub fn encode(&mut self, cum: u32, freq: u32) {
        debug_assert!(freq > 0);
        let r = self.range >> FREQ_BITS;
        self.low += r as u64 * cum as u64;
        self.range = r * freq;
        self.normalize();
    }

    /// Equiprobable bit.
    pub fn encode_bit(&mut self, bit: bool) {
        self.range >>= 1;
        if bit {
            self.low += self.range as u64;
        }
        self.normalize();
    }

    /// Order-0 Exp-Golomb code of `v` with equiprobable bits.
    pub fn encode_exp_golomb(&mut self, v: u64) {
        let v = v + 1;
        let n = 63 - v.leading_zeros();
        for _ in 0..n {
            self.encode_bit(false);
        }
        self.encode_bit(true);
        for i in (0..n).rev() {
            self.encode_bit((v >> i) & 1 == 1);
        }
    }

    /// Code symbol `k` with `row`, escaping out-of-support values.
    pub fn encode_symbol(&mut self, row: &CdfRow, k: i32) {
        match row.index_of(k) {
            Some(i) => self.encode(row.cum[i], row.freq(i)),
            None => {
                let e = row.support();
                self.encode(row.cum[e], row.freq(e));
                let k = k as i64;
                let lo = row.offset as i64;
                let below = k < lo;
                self.encode_bit(below);
                let d = if below { lo - 1 - k } else { k - (lo + e as i64) };
                self.encode_exp_golomb(d as u64);
            }
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub struct RangeDecoder<'a> {
    code: u32,
    range: u32,
    data: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self, BitstreamError> {
        let mut d = RangeDecoder {
            code: 0,
            range: u32::MAX,
            data,
            pos: 0,
        };
        if d.byte()? != 0 {
            return Err(BitstreamError::Corrupt("range coder lead byte is not zero".into()));
        }
        for _ in 0..4 {
            d.code = (d.code << 8) | d.byte()? as u32;
        }
        Ok(d)
    }

    fn byte(&mut self) -> Result<u8, BitstreamError> {
        let b = *self
            .data
            .get(self.pos)
            .ok_or_else(|| BitstreamError::Truncated(format!("substream ended after {} bytes", self.data.len())))?;
        self.pos += 1;
        Ok(b)
    }

    fn normalize(&mut self) -> Result<(), BitstreamError> {
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | self.byte()? as u32;
        }
        Ok(())
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn decode_symbol(&mut self, row: &CdfRow) -> Result<i32, BitstreamError> {
        let r = self.range >> FREQ_BITS;
        let target = self.code / r;
        if target >= 1 << FREQ_BITS {
            return Err(BitstreamError::Corrupt("range decoder target out of bounds".into()));
        }
        let i = row.find(target);
        self.code -= r * row.cum[i];
        self.range = r * row.freq(i);
        self.normalize()?;
        let e = row.support();
        if i < e {
            return Ok(row.offset + i as i32);
        }
        let below = self.decode_bit()?;
        let d = self.decode_exp_golomb()? as i64;
        let lo = row.offset as i64;
        let k = if below { lo - 1 - d } else { lo + e as i64 + d };
        i32::try_from(k).map_err(|_| BitstreamError::Corrupt(format!("escaped symbol {k} out of range")))
    }

    pub fn decode_bit(&mut self) -> Result<bool, BitstreamError> {
        self.range >>= 1;
        let bit = self.code >= self.range;
        if bit {
            self.code -= self.range;
        }
        self.normalize()?;
        Ok(bit)
    }

    pub fn decode_exp_golomb(&mut self) -> Result<u64, BitstreamError> {
        let mut n = 0;
        while !self.decode_bit()? {
            n += 1;
            if n > MAX_EG_BITS {
                return Err(BitstreamError::Corrupt("escape code too long".into()));
            }
        }
        let mut v = 1u64;
        for _ in 0..n {
            v = (v << 1) | self.decode_bit()? as u64;
        }
        Ok(v - 1)
    }
}
