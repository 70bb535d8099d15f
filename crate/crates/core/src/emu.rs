//! Software emulation of the reduced formats and the per-bin computation.
//!
//! binary16 rounding is delegated to the `half` crate, binary32 to the native
//! `f64 -> f32` conversion; both round to nearest, ties to even, with IEEE
//! overflow and gradual underflow.

use half::f16;

use crate::float_bits::{flexp_unchecked, scale_pow2, significand};
use crate::scoring::{Precision, ScoredBin};
use crate::sum::NeumaierSum;
use crate::{QdotError, Result};

/// A binary64 value that is exactly representable in `format`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundedValue {
    pub value: f64,
    pub format: Precision,
}

/// Rounds `x` to the nearest `format` value (ties to even).
pub fn round_to(x: f64, format: Precision) -> Result<RoundedValue> {
    if !x.is_finite() {
        return Err(QdotError::NonFinite { index: 0, value: x });
    }
    let value = match format {
        Precision::Perforate => return Err(QdotError::PerforateFormat),
        Precision::Half => to_f16(x).to_f64(),
        Precision::Single => x as f32 as f64,
        Precision::Double => x,
    };
    Ok(RoundedValue { value, format })
}

/// Dot product of one bin at its assigned precision, in binary64.
///
/// * Perforate: 0.
/// * Double: products in binary64, compensated accumulation in index order.
/// * Half / Single: each factor is reduced to its significand in `[1, 2)`
///   (an exact exponent shift), rounded to the bin format, and multiplied in
///   that format. Each product is shifted by `2^(e_i - u_k)` and accumulated
///   one format wider (Half into binary32, Single into binary64). The bin sum
///   is rescaled by `2^u_k`.
///
/// For exact bins the shift is 1, so no scaling step loses information.
pub fn bin_dot(x: &[f64], y: &[f64], bin: &ScoredBin) -> Result<f64> {
    let idx = &bin.bin.indices;
    let upper = bin.bin.upper;
    match bin.precision {
        Precision::Perforate => Ok(0.0),
        Precision::Double => {
            let s: NeumaierSum = idx.iter().map(|&i| x[i] * y[i]).collect();
            Ok(s.value())
        }
        Precision::Half => {
            let mut acc = 0f32;
            for &i in idx {
                let (a, b) = (x[i], y[i]);
                let ha = to_f16(significand(a)).to_f32();
                let hb = to_f16(significand(b)).to_f32();
                // the binary32 product of two binary16 values is exact
                let prod = f16::from_f32(ha * hb);
                if !prod.is_finite() {
                    return Err(QdotError::BinOverflow(Precision::Half));
                }
                let shift = flexp_unchecked(a) + flexp_unchecked(b) - upper;
                acc += shift_f32(prod.to_f32(), shift);
            }
            Ok(scale_pow2(acc as f64, upper))
        }
        Precision::Single => {
            let mut acc = 0f64;
            for &i in idx {
                let (a, b) = (x[i], y[i]);
                let prod = significand(a) as f32 * significand(b) as f32;
                if !prod.is_finite() {
                    return Err(QdotError::BinOverflow(Precision::Single));
                }
                let shift = flexp_unchecked(a) + flexp_unchecked(b) - upper;
                acc += scale_pow2(prod as f64, shift);
            }
            Ok(scale_pow2(acc, upper))
        }
    }
}

/// `v * 2^shift` in binary32 for `shift <= 0`.
/// Round-to-nearest-even conversion to binary16.
///
/// `f16::from_f64` narrows through `f32` and can round twice. Narrowing to
/// `f32` with round-to-odd first leaves enough bits for the final rounding
/// to be correct.
pub fn to_f16(x: f64) -> f16 {
    f16::from_f32(to_f32_odd(x))
}

fn to_f32_odd(x: f64) -> f32 {
    let r = x as f32;
    if r as f64 == x || !r.is_finite() {
        return r;
    }
    let bits = r.to_bits();
    if bits & 1 == 1 {
        r
    } else if (r as f64).abs() > x.abs() {
        f32::from_bits(bits - 1)
    } else {
        f32::from_bits(bits + 1)
    }
}

#[inline]
fn shift_f32(v: f32, shift: i32) -> f32 {
    if shift == 0 {
        v
    } else {
        // exact unless the result underflows binary32, in which case rounding
        // once through binary64 is what a binary32 multiply would give
        scale_pow2(v as f64, shift) as f32
    }
}

/// Sums bin values in the given order (ascending `u_k`) with compensation.
pub fn qdot_accumulate(bin_values: &[f64]) -> f64 {
    bin_values.iter().copied().collect::<NeumaierSum>().value()
}
