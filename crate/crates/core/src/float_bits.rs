//! Bit-level inspection of binary64 values.

use crate::{QdotError, Result};

const EXP_MASK: u64 = 0x7ff0_0000_0000_0000;
const MANT_MASK: u64 = 0x000f_ffff_ffff_ffff;
const EXP_BIAS: i32 = 1023;
const MANT_BITS: u32 = 52;

/// Unbiased exponent of `x`, i.e. `floor(log2 |x|)`.
///
/// Normal values read the exponent field directly. Subnormals take the slow
/// path through the position of the leading mantissa bit, so
/// `2^flexp(x) <= |x| < 2^(flexp(x) + 1)` holds for every finite nonzero `x`.
pub fn flexp(x: f64) -> Result<i32> {
    if x == 0.0 || !x.is_finite() {
        return Err(QdotError::Domain(x));
    }
    Ok(flexp_unchecked(x))
}

/// [`flexp`] without the domain check. `x` must be finite and nonzero.
#[inline]
pub(crate) fn flexp_unchecked(x: f64) -> i32 {
    let bits = x.to_bits();
    let field = ((bits & EXP_MASK) >> MANT_BITS) as i32;
    if field != 0 {
        field - EXP_BIAS
    } else {
        let mant = bits & MANT_MASK;
        // value = mant * 2^-1074
        (63 - mant.leading_zeros() as i32) - 1074
    }
}

/// Returns `x * 2^-flexp(x)`: the signed significand of `x` in `[1, 2)`.
///
/// Pure bit manipulation, so the result is exact for normals and subnormals.
#[inline]
pub fn significand(x: f64) -> f64 {
    debug_assert!(x.is_finite() && x != 0.0);
    let bits = x.to_bits();
    let sign = bits & (1 << 63);
    let field = (bits & EXP_MASK) >> MANT_BITS;
    let mant = if field != 0 {
        bits & MANT_MASK
    } else {
        let m = bits & MANT_MASK;
        // shift the leading one into the hidden-bit position and drop it
        let shift = m.leading_zeros() - 11;
        (m << shift) & MANT_MASK
    };
    f64::from_bits(sign | ((EXP_BIAS as u64) << MANT_BITS) | mant)
}

/// `x * 2^k` without intermediate overflow for any `k` that keeps the result
/// in range. Every step multiplies by an exact power of two.
pub fn scale_pow2(mut x: f64, mut k: i32) -> f64 {
    const UP: f64 = f64::from_bits(((1023 + EXP_BIAS) as u64) << MANT_BITS); // 2^1023
    const DOWN: f64 = f64::from_bits(1u64 << MANT_BITS); // 2^-1022
    while k > 1023 {
        x *= UP;
        k -= 1023;
        if !x.is_finite() {
            return x;
        }
    }
    while k < -1022 {
        // stop one step early so the final multiply rounds only once
        if k >= -1022 - 52 {
            let half = k / 2;
            return x * pow2(half) * pow2(k - half);
        }
        x *= DOWN;
        k += 1022;
        if x == 0.0 {
            return x;
        }
    }
    x * pow2(k)
}

/// `2^k` for `k` in the normal range `[-1022, 1023]`.
#[inline]
pub(crate) fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + EXP_BIAS) as u64) << MANT_BITS)
}

/// Per-pair exponent sums of two vectors.
///
/// Pairs with a zero factor have an exactly zero product; they are kept aside
/// in `zero_idx` and take no part in the exponent range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentSummary {
    /// `flexp(x_i) + flexp(y_i)` for every pair in `nonzero_idx`, same order.
    pub e: Vec<i16>,
    /// Original indices of the pairs in `e`, ascending.
    pub nonzero_idx: Vec<usize>,
    /// Indices whose product is exactly zero, ascending.
    pub zero_idx: Vec<usize>,
    /// Minimum of `e`; 0 when the summary is degenerate.
    pub e_min: i32,
    /// Maximum of `e`; 0 when the summary is degenerate.
    pub e_max: i32,
    pub n: usize,
    /// True if every nonzero product has the same sign, in which case the sum
    /// dominates its largest term.
    pub sign_uniform: bool,
}

impl ExponentSummary {
    /// No nonzero products at all.
    pub fn is_degenerate(&self) -> bool {
        self.e.is_empty()
    }

    pub fn range(&self) -> Option<(i32, i32)> {
        (!self.is_degenerate()).then_some((self.e_min, self.e_max))
    }
}

/// Computes `flexp(x_i) + flexp(y_i)` for every pair with a nonzero product.
///
/// Integer arithmetic only: each exponent is read from the bit pattern.
pub fn exponent_preprocess(x: &[f64], y: &[f64]) -> Result<ExponentSummary> {
    if x.len() != y.len() {
        return Err(QdotError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let n = x.len();
    let mut e = Vec::with_capacity(n);
    let mut nonzero_idx = Vec::with_capacity(n);
    let mut zero_idx = Vec::new();
    let (mut e_min, mut e_max) = (i32::MAX, i32::MIN);
    let (mut pos, mut neg) = (false, false);

    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        if !a.is_finite() {
            return Err(QdotError::NonFinite { index: i, value: a });
        }
        if !b.is_finite() {
            return Err(QdotError::NonFinite { index: i, value: b });
        }
        if a == 0.0 || b == 0.0 {
            zero_idx.push(i);
            continue;
        }
        let s = flexp_unchecked(a) + flexp_unchecked(b);
        e_min = e_min.min(s);
        e_max = e_max.max(s);
        if (a.is_sign_negative()) ^ (b.is_sign_negative()) {
            neg = true;
        } else {
            pos = true;
        }
        e.push(s as i16);
        nonzero_idx.push(i);
    }

    if e.is_empty() {
        e_min = 0;
        e_max = 0;
    }
    Ok(ExponentSummary {
        e,
        nonzero_idx,
        zero_idx,
        e_min,
        e_max,
        n,
        sign_uniform: !(pos && neg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flexp_examples() {
        assert_eq!(flexp(2f64.powi(27)).unwrap(), 27);
        assert_eq!(flexp(1.0).unwrap(), 0);
        assert_eq!(flexp(0.6).unwrap(), -1);
        assert_eq!(flexp(-3.0).unwrap(), 1);
        assert_eq!(flexp(f64::MAX).unwrap(), 1023);
        assert_eq!(flexp(f64::MIN_POSITIVE).unwrap(), -1022);
    }

    #[test]
    fn flexp_subnormals() {
        let tiny = f64::from_bits(1);
        assert_eq!(flexp(tiny).unwrap(), -1074);
        let x = f64::MIN_POSITIVE / 3.0;
        let k = flexp(x).unwrap();
        assert!(scale_pow2(1.0, k) <= x && x < scale_pow2(1.0, k + 1));
    }

    #[test]
    fn flexp_domain_errors() {
        for bad in [0.0, -0.0, f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(flexp(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn significand_is_exact() {
        for x in [1.0, 3.0, -0.6, 1e300, 1e-310, f64::from_bits(1), -f64::MAX] {
            let m = significand(x);
            assert!((1.0..2.0).contains(&m.abs()), "{x} -> {m}");
            assert_eq!(scale_pow2(m, flexp(x).unwrap()), x);
        }
    }

    #[test]
    fn scale_pow2_extremes() {
        assert_eq!(scale_pow2(1.0, 2046 - 1023), 2f64.powi(1023));
        assert_eq!(scale_pow2(0.5, 1024), 2f64.powi(1023));
        assert_eq!(scale_pow2(1.0, -1074), f64::from_bits(1));
        assert_eq!(scale_pow2(1.0, -1075), 0.0);
        assert!(scale_pow2(1.0, 1024).is_infinite());
        assert_eq!(scale_pow2(3.0, -2000), 0.0);
        assert_eq!(scale_pow2(2f64.powi(-1000), 2000), 2f64.powi(1000));
    }

    #[test]
    fn toy_exponents() {
        let p = |k: i32| 2f64.powi(k);
        let x = [p(27), p(8), p(-3), p(20)];
        let y = [p(23), p(-14), p(7), p(-3)];
        let s = exponent_preprocess(&x, &y).unwrap();
        assert_eq!(s.e, vec![50, -6, 4, 17]);
        assert_eq!((s.e_min, s.e_max), (-6, 50));
        assert!(s.zero_idx.is_empty());
    }

    #[test]
    fn zero_products_set_aside() {
        let s = exponent_preprocess(&[3.0, 0.0], &[5.0, 7.0]).unwrap();
        assert_eq!(s.e, vec![3]);
        assert_eq!(s.nonzero_idx, vec![0]);
        assert_eq!(s.zero_idx, vec![1]);
        assert_eq!(s.e.len() + s.zero_idx.len(), s.n);

        let d = exponent_preprocess(&[0.0, 1.0], &[2.0, 0.0]).unwrap();
        assert!(d.is_degenerate());
        assert_eq!(d.range(), None);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            exponent_preprocess(&[1.0], &[1.0, 2.0]),
            Err(QdotError::LengthMismatch { x: 1, y: 2 })
        );
        assert!(matches!(
            exponent_preprocess(&[1.0, f64::NAN], &[1.0, 1.0]),
            Err(QdotError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn sign_uniformity() {
        assert!(
            exponent_preprocess(&[1.0, -2.0], &[1.0, -2.0])
                .unwrap()
                .sign_uniform
        );
        assert!(
            exponent_preprocess(&[-1.0, -2.0], &[1.0, 2.0])
                .unwrap()
                .sign_uniform
        );
        assert!(
            !exponent_preprocess(&[1.0, -2.0], &[1.0, 2.0])
                .unwrap()
                .sign_uniform
        );
    }
}
