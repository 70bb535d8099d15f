//! Brute-force reimplementation of the kernel, one component at a time, with
//! its own rounding routines. Shared by the core integration tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// `(m, e)` with `|x| = m * 2^e`, `1 <= m < 2`, by repeated halving/doubling.
pub fn decompose(x: f64) -> (f64, i32) {
    assert!(x != 0.0 && x.is_finite());
    let mut m = x.abs();
    let mut e = 0;
    while m >= 2.0 {
        m /= 2.0;
        e += 1;
    }
    while m < 1.0 {
        m *= 2.0;
        e -= 1;
    }
    (m, e)
}

pub fn pow2(k: i32) -> f64 {
    let mut v = 1.0;
    if k >= 0 {
        for _ in 0..k {
            v *= 2.0;
        }
    } else {
        for _ in 0..-k {
            v /= 2.0;
        }
    }
    v
}

fn round_half_even(v: f64) -> f64 {
    let f = v.floor();
    let diff = v - f;
    if diff > 0.5 || (diff == 0.5 && f % 2.0 != 0.0) {
        f + 1.0
    } else {
        f
    }
}

/// Round-to-nearest-even onto a binary format with `mant` fraction bits,
/// minimum normal exponent `emin` and largest finite exponent `emax`.
fn round_format(x: f64, mant: i32, emin: i32, emax: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let (_, e) = decompose(x);
    let quantum_exp = e.max(emin) - mant;
    // |x| / quantum is exact: both are binary and the quotient stays normal.
    let q = pow2(quantum_exp);
    let r = round_half_even(x.abs() / q) * q;
    let max_finite = (2.0 - pow2(-mant)) * pow2(emax);
    if r > max_finite {
        sign * f64::INFINITY
    } else {
        sign * r
    }
}

pub fn rne_f16(x: f64) -> f64 {
    round_format(x, 10, -14, 15)
}

pub fn rne_f32(x: f64) -> f64 {
    round_format(x, 23, -126, 127)
}

/// Neumaier summation written out from its definition.
pub fn compensated(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() {
            (s - t) + v
        } else {
            (v - t) + s
        };
        s = t;
    }
    if s.is_finite() {
        s + c
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Perforate,
    Half,
    Single,
    Double,
}

impl Level {
    pub fn bits(self) -> i32 {
        match self {
            Level::Perforate => 0,
            Level::Half => 10,
            Level::Single => 23,
            Level::Double => 52,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Exact,
    Ranged(i32),
}

/// Result of the simulator.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub value: f64,
    /// Precision of every component, zero products as `Perforate`.
    pub levels: Vec<Level>,
    /// `(upper, members, score)` per bin, ascending.
    pub bins: Vec<(i32, usize, i32)>,
}

fn ceil_log2(m: usize) -> i32 {
    let mut k = 0;
    while (1usize << k) < m {
        k += 1;
    }
    k
}

fn floor_log2(eps: f64) -> i32 {
    decompose(eps).1
}

fn level_for(score: i32) -> Level {
    if score < 0 {
        Level::Perforate
    } else if score < 10 {
        Level::Half
    } else if score < 23 {
        Level::Single
    } else {
        Level::Double
    }
}

/// Simulates the kernel on binary64 input with tolerance `eps`; `per_bin`
/// divides the tolerance evenly across bins.
pub fn simulate(x: &[f64], y: &[f64], eps: f64, per_bin: bool, grouping: Grouping) -> SimResult {
    let n = x.len();
    let mut levels = vec![Level::Perforate; n];
    let mut exps: Vec<Option<i32>> = vec![None; n];
    for i in 0..n {
        if x[i] != 0.0 && y[i] != 0.0 {
            exps[i] = Some(decompose(x[i]).1 + decompose(y[i]).1);
        }
    }
    let present: Vec<i32> = exps.iter().flatten().copied().collect();
    if present.is_empty() {
        return SimResult {
            value: 0.0,
            levels,
            bins: Vec::new(),
        };
    }
    let e_min = *present.iter().min().unwrap();
    let e_max = *present.iter().max().unwrap();

    // upper exponent of the bin each component falls in
    let bin_of = |e: i32| -> i32 {
        if e_max - e_min <= -floor_log2(eps) - 23 {
            return e_max;
        }
        match grouping {
            Grouping::Exact => e,
            Grouping::Ranged(w) => {
                let mut k = 1;
                while e_min + k * w - 1 < e {
                    k += 1;
                }
                e_min + k * w - 1
            }
        }
    };
    let mut members: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        if let Some(e) = exps[i] {
            members.entry(bin_of(e)).or_default().push(i);
        }
    }
    let eff = if per_bin && members.len() > 1 {
        eps / members.len() as f64
    } else {
        eps
    };

    let mut bins = Vec::new();
    let mut bin_values = Vec::new();
    for (&u, idx) in &members {
        let m = idx.len();
        let score = ceil_log2(m) + u - e_max - floor_log2(eff) + 1;
        let level = level_for(score);
        bins.push((u, m, score));
        for &i in idx {
            levels[i] = level;
        }
        let value = match level {
            Level::Perforate => 0.0,
            Level::Double => compensated(idx.iter().map(|&i| x[i] * y[i])),
            Level::Half => {
                let mut acc = 0f32;
                for &i in idx {
                    let (ma, ea) = decompose(x[i]);
                    let (mb, eb) = decompose(y[i]);
                    let sign = (x[i] * y[i]).signum();
                    let p = rne_f16(rne_f16(ma) * rne_f16(mb)) * sign;
                    acc += rne_f32(p * pow2(ea + eb - u)) as f32;
                }
                acc as f64 * pow2(u)
            }
            Level::Single => {
                let mut acc = 0f64;
                for &i in idx {
                    let (ma, ea) = decompose(x[i]);
                    let (mb, eb) = decompose(y[i]);
                    let sign = (x[i] * y[i]).signum();
                    let p = rne_f32(rne_f32(ma) * rne_f32(mb)) * sign;
                    acc += p * pow2(ea + eb - u);
                }
                acc * pow2(u)
            }
        };
        bin_values.push(value);
    }
    SimResult {
        value: compensated(bin_values),
        levels,
        bins,
    }
}
