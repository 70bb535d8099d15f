//! Bin scores, precision assignment and the closed-form error bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binning::{Bin, BinPartition, Strategy};
use crate::float_bits::{flexp_unchecked, scale_pow2};
use crate::{QdotError, Result};

/// Evaluation precision of a bin. Ordered from coarsest to finest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Precision {
    /// Skipped entirely (a 0-bit representation).
    Perforate,
    Half,
    Single,
    Double,
}

impl Precision {
    pub const ALL: [Precision; 4] = [
        Precision::Perforate,
        Precision::Half,
        Precision::Single,
        Precision::Double,
    ];

    /// Explicit mantissa bits of the format.
    pub const fn mantissa_bits(self) -> u32 {
        match self {
            Precision::Perforate => 0,
            Precision::Half => 10,
            Precision::Single => 23,
            Precision::Double => 52,
        }
    }

    /// `2^-mantissa_bits`; 1 for perforated bins.
    pub fn eps(self) -> f64 {
        f64::from_bits(((1023 - self.mantissa_bits()) as u64) << 52)
    }

    pub const fn name(self) -> &'static str {
        match self {
            Precision::Perforate => "perforate",
            Precision::Half => "half",
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }

    /// The format with `bits` mantissa bits, if it is one of ours.
    pub fn from_mantissa_bits(bits: u32) -> Option<Precision> {
        Precision::ALL
            .into_iter()
            .find(|p| p.mantissa_bits() == bits)
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the tolerance is shared between bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
pub enum SplitMode {
    /// Every bin is scored against the full tolerance; the relative bound is
    /// `N_bins * epsilon`.
    #[default]
    None,
    /// Every bin is scored against `epsilon / N_bins`; the relative bound is
    /// `epsilon`.
    PerBin,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::None => "none",
            SplitMode::PerBin => "per-bin",
        })
    }
}

impl FromStr for SplitMode {
    type Err = QdotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SplitMode::None),
            "per-bin" | "perbin" => Ok(SplitMode::PerBin),
            _ => Err(QdotError::InvalidParameter(format!(
                "unknown split mode `{s}`"
            ))),
        }
    }
}

/// Largest accepted tolerance; keeps every score in comfortable `i32` range.
pub const MAX_EPSILON: f64 = 1_152_921_504_606_846_976.0; // 2^60

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    pub epsilon: f64,
    pub split: SplitMode,
    /// Mantissa bits of the input format (52 for binary64 inputs).
    pub input_mu: u32,
}

impl ToleranceConfig {
    pub fn new(epsilon: f64, split: SplitMode) -> Result<Self> {
        let cfg = ToleranceConfig {
            epsilon,
            split,
            input_mu: Precision::Double.mantissa_bits(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= MAX_EPSILON) {
            return Err(QdotError::InvalidParameter(format!(
                "tolerance must lie in (0, 2^60], got {}",
                self.epsilon
            )));
        }
        if !matches!(self.input_mu, 10 | 23 | 52) {
            return Err(QdotError::InvalidParameter(format!(
                "input precision must have 10, 23 or 52 mantissa bits, got {}",
                self.input_mu
            )));
        }
        Ok(())
    }

    pub fn input_precision(&self) -> Precision {
        Precision::from_mantissa_bits(self.input_mu).unwrap_or(Precision::Double)
    }

    /// Tolerance each bin is scored against when there are `n_bins` bins.
    pub fn effective_epsilon(&self, n_bins: usize) -> f64 {
        match self.split {
            SplitMode::PerBin if n_bins > 1 => self.epsilon / n_bins as f64,
            _ => self.epsilon,
        }
    }
}

fn ceil_log2(m: usize) -> i32 {
    debug_assert!(m >= 1);
    (usize::BITS - (m - 1).leading_zeros()) as i32
}

fn floor_log2(eps: f64) -> i32 {
    debug_assert!(eps > 0.0 && eps.is_finite());
    flexp_unchecked(eps)
}

/// `ceil(log2 M) + u - e_max - floor(log2 eps) + 1`, evaluated in integers.
///
/// This is the number of mantissa bits a bin of `m` products with exponent
/// sums at most `upper` needs so its contribution stays under `eps` relative
/// to `2^e_max`.
pub fn bin_score(m: usize, upper: i32, e_max: i32, eps: f64) -> i32 {
    ceil_log2(m) + upper - e_max - floor_log2(eps) + 1
}

/// Coarsest precision whose mantissa covers `score` bits, capped at the input
/// precision (no up-casting).
pub fn precision_of(score: i32, input_mu: u32) -> Precision {
    if score < 0 {
        return Precision::Perforate;
    }
    let input = Precision::from_mantissa_bits(input_mu).unwrap_or(Precision::Double);
    [Precision::Half, Precision::Single, Precision::Double]
        .into_iter()
        .filter(|p| *p <= input)
        .find(|p| score < p.mantissa_bits() as i32)
        .unwrap_or(input)
}

/// True when the exponent range alone guarantees every bin keeps the input
/// precision: `e_max - e_min <= -floor(log2 eps) - mu_below`, where
/// `mu_below` is the mantissa width of the format directly below the input.
pub fn early_termination(e_min: i32, e_max: i32, input_mu: u32, epsilon: f64) -> bool {
    let below = match input_mu {
        52 => Precision::Single.mantissa_bits(),
        23 => Precision::Half.mantissa_bits(),
        _ => Precision::Perforate.mantissa_bits(),
    } as i32;
    e_max - e_min <= -floor_log2(epsilon) - below
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBin {
    pub bin: Bin,
    pub score: i32,
    pub precision: Precision,
}

/// Component counts per precision (zero products count as perforated).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionCounts {
    pub perforate: usize,
    pub half: usize,
    pub single: usize,
    pub double: usize,
}

impl PrecisionCounts {
    pub fn add(&mut self, p: Precision, k: usize) {
        match p {
            Precision::Perforate => self.perforate += k,
            Precision::Half => self.half += k,
            Precision::Single => self.single += k,
            Precision::Double => self.double += k,
        }
    }

    pub fn get(&self, p: Precision) -> usize {
        match p {
            Precision::Perforate => self.perforate,
            Precision::Half => self.half,
            Precision::Single => self.single,
            Precision::Double => self.double,
        }
    }

    pub fn total(&self) -> usize {
        self.perforate + self.half + self.single + self.double
    }

    /// Percentages in precision order; all zero for an empty vector.
    pub fn percentages(&self) -> [f64; 4] {
        let n = self.total();
        Precision::ALL.map(|p| {
            if n == 0 {
                0.0
            } else {
                100.0 * self.get(p) as f64 / n as f64
            }
        })
    }
}

/// Bins with their precisions: everything the computation phase needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    /// Scored bins in ascending `upper` order.
    pub bins: Vec<ScoredBin>,
    /// Components with an exactly zero product; perforated at no cost.
    pub zero_indices: Vec<usize>,
    pub n: usize,
    pub e_min: i32,
    pub e_max: i32,
    pub strategy: Strategy,
    pub tolerance: ToleranceConfig,
    /// Tolerance the scores were computed against.
    pub eps_eff: f64,
    pub early_terminated: bool,
    /// Every nonzero product has the same sign.
    pub sign_uniform: bool,
}

impl ParameterSet {
    /// Parameters for a vector pair without a single nonzero product.
    pub fn empty(
        n: usize,
        zero_indices: Vec<usize>,
        strategy: Strategy,
        tolerance: ToleranceConfig,
    ) -> Self {
        ParameterSet {
            bins: Vec::new(),
            zero_indices,
            n,
            e_min: 0,
            e_max: 0,
            strategy,
            tolerance,
            eps_eff: tolerance.epsilon,
            early_terminated: false,
            sign_uniform: true,
        }
    }

    pub fn counts(&self) -> PrecisionCounts {
        let mut c = PrecisionCounts::default();
        c.add(Precision::Perforate, self.zero_indices.len());
        for b in &self.bins {
            c.add(b.precision, b.bin.cardinality());
        }
        c
    }

    /// Precision of every component, indexed by component.
    pub fn component_precisions(&self) -> Vec<Precision> {
        let mut out = vec![Precision::Perforate; self.n];
        for b in &self.bins {
            for &i in &b.bin.indices {
                out[i] = b.precision;
            }
        }
        out
    }

    /// Absolute error bound `sum_k M_k 2^(u_k + 2) eps(k)`.
    pub fn abs_bound(&self) -> f64 {
        self.bound_relative_to(0)
    }

    /// Relative error bound `sum_k M_k 2^(u_k - e_max + 2) eps(k)`; valid when
    /// `e_max <= flexp(x . y)`.
    pub fn rel_bound(&self) -> f64 {
        self.bound_relative_to(self.e_max)
    }

    /// `sum_k M_k 2^(u_k - reference_exp + 2) eps(k)`.
    ///
    /// Exponent sums only bracket a product to `2^e <= |x y| < 2^(e + 2)`,
    /// hence the `+ 2`.
    pub fn bound_relative_to(&self, reference_exp: i32) -> f64 {
        self.bins
            .iter()
            .map(|b| {
                bound_term(
                    b.bin.cardinality(),
                    b.bin.upper - reference_exp,
                    b.precision,
                )
            })
            .sum()
    }
}

/// One bin's share of the error bound: `M 2^(shift + 2) eps(precision)`.
pub fn bound_term(m: usize, shift: i32, precision: Precision) -> f64 {
    scale_pow2(m as f64, shift + 2 - precision.mantissa_bits() as i32)
}

/// Scores every bin of `partition` and picks its precision.
pub fn assign_precisions(
    partition: BinPartition,
    zero_indices: Vec<usize>,
    n: usize,
    cfg: ToleranceConfig,
) -> ParameterSet {
    let eps_eff = cfg.effective_epsilon(partition.bins.len());
    let e_max = partition.e_max;
    let bins = partition
        .bins
        .into_iter()
        .map(|bin| {
            let score = bin_score(bin.cardinality(), bin.upper, e_max, eps_eff);
            ScoredBin {
                precision: precision_of(score, cfg.input_mu),
                score,
                bin,
            }
        })
        .collect();
    ParameterSet {
        bins,
        zero_indices,
        n,
        e_min: partition.e_min,
        e_max,
        strategy: partition.strategy,
        tolerance: cfg,
        eps_eff,
        early_terminated: false,
        sign_uniform: false,
    }
}
