//! Fixed-point re-quantization.
//!
//! A real multiplier `M in (0, 1)` is stored as a normalized mantissa
//! `M0 in [2^30, 2^31)` and a right shift `n in [0, 31]` so that
//! `M = M0 * 2^(-31 - n)`. Applying it to an accumulator is a 64-bit product
//! followed by a rounding right shift of `31 + n` bits.

use serde::{Deserialize, Serialize};

use super::{AccTensor, QuantError, QuantizedTensor};

const MANTISSA_MIN: i64 = 1 << 30;
const MANTISSA_LIMIT: i64 = 1 << 31;

/// One channel's fixed-point multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Multiplier {
    pub m0: i32,
    pub n: u8,
}

impl Multiplier {
    pub fn new(m0: i32, n: u8) -> Self {
        Self { m0, n }
    }

    /// Total right shift applied to the 64-bit product.
    pub fn total_shift(&self) -> u32 {
        31 + u32::from(self.n)
    }

    /// The real multiplier this pair encodes.
    pub fn real(&self) -> f64 {
        f64::from(self.m0) * (-f64::from(self.total_shift() as i32)).exp2()
    }

    pub fn check(&self) -> Result<(), String> {
        if i64::from(self.m0) < MANTISSA_MIN {
            return Err(format!("mantissa {} below 2^30", self.m0));
        }
        if self.n > 31 {
            return Err(format!("shift {} above 31", self.n));
        }
        Ok(())
    }
}

/// Per-channel multipliers plus the output zero-point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequantParams {
    pub multipliers: Vec<Multiplier>,
    pub z_out: i8,
    /// Scale attached to the requantized output tensor.
    #[serde(default = "unit_scale")]
    pub out_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl RequantParams {
    pub fn new(multipliers: Vec<Multiplier>, z_out: i8) -> Self {
        Self { multipliers, z_out, out_scale: 1.0 }
    }

    /// The same multiplier on every one of `k` channels.
    pub fn uniform(k: usize, m: Multiplier, z_out: i8) -> Self {
        Self::new(vec![m; k], z_out)
    }

    pub fn validate(&self) -> Result<(), QuantError> {
        for (channel, m) in self.multipliers.iter().enumerate() {
            m.check().map_err(|reason| QuantError::InvalidRequant { channel, reason })?;
        }
        if !(self.out_scale > 0.0 && self.out_scale.is_finite()) {
            return Err(QuantError::InvalidScale(self.out_scale));
        }
        Ok(())
    }
}

/// `round(value / 2^shift)` with ties away from zero, exact for any `i64`.
pub fn rounding_shift(value: i64, shift: u32) -> i64 {
    if shift == 0 {
        return value;
    }
    let v = i128::from(value);
    let half = 1i128 << (shift - 1);
    let mag = (v.abs() + half) >> shift;
    (if v < 0 { -mag } else { mag }) as i64
}

/// Requantize one accumulator of channel `k`:
/// `clamp(z_out + round(acc * M0 / 2^(31 + n)), -128, 127)`.
///
/// Panics if `k` is out of range for `p`.
pub fn requantize(acc: i32, k: usize, p: &RequantParams) -> i8 {
    requantize_unclamped(acc, k, p).clamp(-128, 127) as i8
}

/// `z_out + round(acc * M0 / 2^(31 + n))` before saturation to int8.
pub fn requantize_unclamped(acc: i32, k: usize, p: &RequantParams) -> i64 {
    let m = p.multipliers[k];
    let product = i64::from(acc) * i64::from(m.m0);
    rounding_shift(product, m.total_shift()) + i64::from(p.z_out)
}

/// Derive per-channel multipliers from the input, weight and output scales.
pub fn compute_requant_params(s_in: f64, s_w: &[f64], s_out: f64, z_out: i8) -> Result<RequantParams, QuantError> {
    for &s in std::iter::once(&s_in).chain(s_w).chain(std::iter::once(&s_out)) {
        if !(s > 0.0 && s.is_finite()) {
            return Err(QuantError::InvalidScale(s));
        }
    }
    let multipliers = s_w
        .iter()
        .enumerate()
        .map(|(channel, &sw)| normalize_multiplier(s_in * sw / s_out, channel))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RequantParams { multipliers, z_out, out_scale: s_out })
}

fn normalize_multiplier(value: f64, channel: usize) -> Result<Multiplier, QuantError> {
    let unsupported = || QuantError::UnsupportedMultiplier { channel, value };
    if !(value > 0.0 && value < 1.0) {
        return Err(unsupported());
    }
    // Bring the multiplier into [0.5, 1); scaling by powers of two is exact.
    let mut n: i32 = 0;
    let mut frac = value;
    while frac < 0.5 {
        frac *= 2.0;
        n += 1;
        if n > 31 {
            return Err(unsupported());
        }
    }
    let mut m0 = (frac * (MANTISSA_LIMIT as f64)).round() as i64;
    if m0 == MANTISSA_LIMIT {
        // Rounded up to the next power of two.
        if n == 0 {
            return Err(unsupported());
        }
        m0 = MANTISSA_MIN;
        n -= 1;
    }
    Ok(Multiplier { m0: m0 as i32, n: n as u8 })
}

/// Element-wise [`requantize`] over an accumulator tensor.
pub fn requantize_tensor(acc: &AccTensor, p: &RequantParams) -> Result<QuantizedTensor, QuantError> {
    let dims = acc.dims();
    if p.multipliers.len() != dims.c {
        return Err(QuantError::DimensionMismatch(format!(
            "{} multipliers for {} output channels",
            p.multipliers.len(),
            dims.c
        )));
    }
    p.validate()?;
    let data = acc.data().iter().enumerate().map(|(i, &a)| requantize(a, i % dims.c, p)).collect();
    QuantizedTensor::new(dims, data, p.out_scale, p.z_out)
}
