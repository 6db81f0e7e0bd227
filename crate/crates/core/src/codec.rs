//! Min-max normalization and m-bit binary encoding of continuous values.
//!
//! A value in `[0, 1]` is quantized to `2^m` levels with step `1/(2^m - 1)`
//! and written as a big-endian bit vector; a regressor of dimension `n`
//! encodes to `n * m` bits in channel-major order.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Bit width and per-channel ranges used to move between continuous data
/// and binary visibles. Stored in the model file so inference uses the
/// exact training-time codec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingConfig {
    pub bits: u32,
    /// `(min, max)` per channel, computed on training data only.
    pub channels: Vec<(f64, f64)>,
}

impl EncodingConfig {
    pub fn new(bits: u32, channels: Vec<(f64, f64)>) -> Result<Self> {
        if bits == 0 {
            return Err(Error::InvalidArgument("bits must be >= 1".into()));
        }
        for (i, &(lo, hi)) in channels.iter().enumerate() {
            if !(hi > lo) {
                return Err(Error::InvalidArgument(format!(
                    "channel {i}: max ({hi}) must exceed min ({lo})"
                )));
            }
        }
        Ok(Self { bits, channels })
    }

    pub fn levels(&self) -> u64 {
        (1u64 << self.bits) - 1
    }
}

/// Affine map sending `lo -> 0`, `hi -> 1`.
pub fn normalize(series: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "degenerate range: lo = {lo}, hi = {hi}"
        )));
    }
    Ok(series.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// Inverse of [`normalize`].
pub fn denormalize(series: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "degenerate range: lo = {lo}, hi = {hi}"
        )));
    }
    Ok(series.iter().map(|v| lo + v * (hi - lo)).collect())
}

pub fn normalize_value(v: f64, lo: f64, hi: f64) -> f64 {
    (v - lo) / (hi - lo)
}

pub fn denormalize_value(v: f64, lo: f64, hi: f64) -> f64 {
    lo + v * (hi - lo)
}

/// Quantizer level for `v` in `[0, 1]`; values outside are clamped.
pub fn level_of(v: f64, bits: u32) -> u64 {
    let v = if (0.0..=1.0).contains(&v) {
        v
    } else {
        log::warn!("encode: value {v} outside [0,1], clamping");
        v.clamp(0.0, 1.0)
    };
    let max_level = (1u64 << bits) - 1;
    (v * max_level as f64).round() as u64
}

/// Continuous value of a quantizer level: `level / (2^m - 1)`.
pub fn value_of(level: u64, bits: u32) -> f64 {
    let max_level = (1u64 << bits) - 1;
    level as f64 / max_level as f64
}

/// Encode `v` in `[0, 1]` as a big-endian bit vector of length `bits`.
pub fn encode(v: f64, bits: u32) -> Vec<f64> {
    let level = level_of(v, bits);
    (0..bits)
        .map(|i| ((level >> (bits - 1 - i)) & 1) as f64)
        .collect()
}

/// Decode a big-endian bit vector back to `[0, 1]`.
pub fn decode(bit_vec: &[f64], bits: u32) -> Result<f64> {
    if bit_vec.len() != bits as usize {
        return Err(Error::dims(format!(
            "expected {bits} bits, got {}",
            bit_vec.len()
        )));
    }
    let mut level = 0u64;
    for &b in bit_vec {
        level = (level << 1) | u64::from(b >= 0.5);
    }
    Ok(value_of(level, bits))
}

/// Encode a vector of normalized channel values to `n * m` bits,
/// channel-major: all bits of channel 0, then channel 1, ...
pub fn encode_vector(values: &[f64], bits: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() * bits as usize);
    for &v in values {
        out.extend(encode(v, bits));
    }
    out
}

/// Inverse of [`encode_vector`] at level granularity.
pub fn decode_vector(bit_vec: &[f64], bits: u32) -> Result<Vec<f64>> {
    let m = bits as usize;
    if bit_vec.len() % m != 0 {
        return Err(Error::dims(format!(
            "bit vector length {} is not a multiple of {m}",
            bit_vec.len()
        )));
    }
    bit_vec.chunks(m).map(|c| decode(c, bits)).collect()
}
