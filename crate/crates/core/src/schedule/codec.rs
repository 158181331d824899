//! Fixed-width packing of assignment tuples for uplink.
//!
//! Fields are laid out least-significant bit first in the order sv, beam,
//! channel, t_tx, t_flight, sweep flag. The sweep time is a per-grid constant,
//! so the word carries only a flag selecting it (set) or zero (clear).
//!
//! Packed streams place bit `i` of the stream in byte `i / 8` at bit position
//! `i % 8`, and each word contributes its bits least-significant first.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::Tuple;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitLayout {
    pub sv_bits: u32,
    pub beam_bits: u32,
    pub channel_bits: u32,
    pub t_tx_bits: u32,
    pub t_flight_bits: u32,
    pub sweep_flag_bits: u32,
    /// Sweep time selected by the flag.
    pub sweep_us: u32,
}

impl Default for BitLayout {
    fn default() -> Self {
        Self {
            sv_bits: 14,
            beam_bits: 4,
            channel_bits: 7,
            t_tx_bits: 20,
            t_flight_bits: 13,
            sweep_flag_bits: 1,
            sweep_us: 0,
        }
    }
}

impl BitLayout {
    /// Trades one SV-id bit for a longer time-of-flight field, for high
    /// shells or low elevation masks.
    pub fn long_flight() -> Self {
        Self {
            sv_bits: 13,
            t_flight_bits: 14,
            ..Self::default()
        }
    }

    pub fn with_sweep(mut self, sweep_us: u32) -> Self {
        self.sweep_us = sweep_us;
        self
    }

    fn widths(&self) -> [u32; 6] {
        [
            self.sv_bits,
            self.beam_bits,
            self.channel_bits,
            self.t_tx_bits,
            self.t_flight_bits,
            self.sweep_flag_bits,
        ]
    }

    pub fn total_bits(&self) -> u32 {
        self.widths().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_bits() > 64 {
            return Err(Error::param("layout", "total width exceeds 64 bits"));
        }
        if self.sweep_flag_bits > 1 {
            return Err(Error::param("sweep_flag_bits", "must be 0 or 1"));
        }
        if self.widths()[..5].iter().any(|w| *w > 32) {
            return Err(Error::param("layout", "field width exceeds 32 bits"));
        }
        Ok(())
    }

    /// Largest representable value of a field of width `bits`.
    pub fn max_value(bits: u32) -> u64 {
        if bits >= 64 {
            u64::MAX
        } else {
            (1u64 << bits) - 1
        }
    }
}

fn put(word: &mut u64, shift: &mut u32, field: &'static str, value: u64, bits: u32) -> Result<()> {
    if value > BitLayout::max_value(bits) {
        return Err(Error::Encoding { field, value, bits });
    }
    if bits > 0 {
        *word |= value << *shift;
    }
    *shift += bits;
    Ok(())
}

fn take(word: u64, shift: &mut u32, bits: u32) -> u64 {
    let v = if bits == 0 {
        0
    } else {
        (word >> *shift) & BitLayout::max_value(bits)
    };
    *shift += bits;
    v
}

pub fn encode_assignment(t: &Tuple, layout: &BitLayout) -> Result<u64> {
    layout.validate()?;
    let flag = if t.t_sweep_us == 0 {
        0
    } else if t.t_sweep_us == layout.sweep_us && layout.sweep_flag_bits == 1 {
        1
    } else {
        return Err(Error::Encoding {
            field: "t_sweep",
            value: t.t_sweep_us as u64,
            bits: layout.sweep_flag_bits,
        });
    };
    let mut w = 0u64;
    let mut s = 0u32;
    put(&mut w, &mut s, "sv_id", t.sv_id as u64, layout.sv_bits)?;
    put(&mut w, &mut s, "beam_id", t.beam_id as u64, layout.beam_bits)?;
    put(&mut w, &mut s, "channel_id", t.channel_id as u64, layout.channel_bits)?;
    put(&mut w, &mut s, "t_tx", t.t_tx_us as u64, layout.t_tx_bits)?;
    put(&mut w, &mut s, "t_flight", t.t_flight_us as u64, layout.t_flight_bits)?;
    put(&mut w, &mut s, "t_sweep", flag, layout.sweep_flag_bits)?;
    Ok(w)
}

pub fn decode_assignment(word: u64, layout: &BitLayout) -> Result<Tuple> {
    layout.validate()?;
    if layout.total_bits() < 64 && word >> layout.total_bits() != 0 {
        return Err(Error::Decoding(format!("word {word:#x} has bits above the {}-bit layout", layout.total_bits())));
    }
    let mut s = 0u32;
    let sv_id = take(word, &mut s, layout.sv_bits) as u32;
    let beam_id = take(word, &mut s, layout.beam_bits) as u16;
    let channel_id = take(word, &mut s, layout.channel_bits) as u16;
    let t_tx_us = take(word, &mut s, layout.t_tx_bits) as u32;
    let t_flight_us = take(word, &mut s, layout.t_flight_bits) as u32;
    let flag = take(word, &mut s, layout.sweep_flag_bits);
    Ok(Tuple {
        sv_id,
        beam_id,
        channel_id,
        t_tx_us,
        t_flight_us,
        t_sweep_us: if flag == 1 { layout.sweep_us } else { 0 },
    })
}

/// Concatenates `width`-bit words into a byte stream.
pub fn pack_words(words: &[u64], width: u32) -> Vec<u8> {
    let total = words.len() as u64 * width as u64;
    let mut out = alloc::vec![0u8; total.div_ceil(8) as usize];
    let mut bit = 0u64;
    for &w in words {
        for k in 0..width {
            if (w >> k) & 1 == 1 {
                out[(bit / 8) as usize] |= 1 << (bit % 8);
            }
            bit += 1;
        }
    }
    out
}

pub fn unpack_words(bytes: &[u8], width: u32, count: usize) -> Result<Vec<u64>> {
    if width == 0 || width > 64 {
        return Err(Error::Decoding(format!("unsupported word width {width}")));
    }
    let need = (count as u64 * width as u64).div_ceil(8);
    if (bytes.len() as u64) < need {
        return Err(Error::Decoding(format!(
            "packed stream holds {} bytes, {} words of {} bits need {}",
            bytes.len(),
            count,
            width,
            need
        )));
    }
    let mut out = Vec::with_capacity(count);
    let mut bit = 0u64;
    for _ in 0..count {
        let mut w = 0u64;
        for k in 0..width {
            if (bytes[(bit / 8) as usize] >> (bit % 8)) & 1 == 1 {
                w |= 1 << k;
            }
            bit += 1;
        }
        out.push(w);
    }
    Ok(out)
}
