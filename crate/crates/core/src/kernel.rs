//! The full kernel: parameter selection, computation and error bounds.

use std::time::Instant;

use serde::Serialize;

use crate::binning::{make_bins, sorted_bin_init, Bin, Strategy};
use crate::emu::{bin_dot, qdot_accumulate};
use crate::float_bits::{exponent_preprocess, flexp_unchecked};
use crate::scoring::{
    assign_precisions, bin_score, early_termination, precision_of, ParameterSet, PrecisionCounts,
    ScoredBin, ToleranceConfig,
};
use crate::sum::{two_prod, ExactSum};
use crate::{QdotError, Result};

/// Runs exponent preprocessing, the early-termination test, sorted bin
/// initialization, binning and scoring.
///
/// If the exponent range is narrow enough that every bin would keep the
/// input precision, the sort and scoring steps are skipped and a single
/// input-precision bin holds every nonzero component.
pub fn select_parameters(
    x: &[f64],
    y: &[f64],
    cfg: ToleranceConfig,
    strategy: Strategy,
) -> Result<ParameterSet> {
    cfg.validate()?;
    let summary = exponent_preprocess(x, y)?;
    if summary.is_degenerate() {
        return Ok(ParameterSet::empty(
            summary.n,
            summary.zero_idx,
            strategy,
            cfg,
        ));
    }
    let sign_uniform = summary.sign_uniform;

    if early_termination(summary.e_min, summary.e_max, cfg.input_mu, cfg.epsilon) {
        let bin = Bin {
            lower: summary.e_min - 1,
            upper: summary.e_max,
            indices: summary.nonzero_idx.clone(),
        };
        let eps_eff = cfg.effective_epsilon(1);
        let score = bin_score(bin.cardinality(), bin.upper, summary.e_max, eps_eff);
        let precision = precision_of(score, cfg.input_mu);
        debug_assert_eq!(precision, cfg.input_precision());
        return Ok(ParameterSet {
            bins: vec![ScoredBin {
                bin,
                score,
                precision,
            }],
            zero_indices: summary.zero_idx,
            n: summary.n,
            e_min: summary.e_min,
            e_max: summary.e_max,
            strategy,
            tolerance: cfg,
            eps_eff,
            early_terminated: true,
            sign_uniform,
        });
    }

    let init = sorted_bin_init(&summary);
    let partition = make_bins(&summary, &init, strategy)?;
    let mut params = assign_precisions(partition, summary.zero_idx, summary.n, cfg);
    params.sign_uniform = sign_uniform;
    Ok(params)
}

/// Evaluates every bin of `params` and accumulates in ascending bin order.
pub fn compute(x: &[f64], y: &[f64], params: &ParameterSet) -> Result<f64> {
    let values = params
        .bins
        .iter()
        .map(|b| bin_dot(x, y, b))
        .collect::<Result<Vec<_>>>()?;
    let value = qdot_accumulate(&values);
    if !value.is_finite() {
        return Err(QdotError::Overflow);
    }
    Ok(value)
}

/// Whether the `e_max <= flexp(x . y)` hypothesis behind the relative bound
/// is known to hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundHypothesis {
    /// All nonzero products share a sign (e.g. `x == y`), so the sum is at
    /// least as large as its largest term.
    Holds,
    /// Checked against an exact reference.
    Verified,
    /// Checked against an exact reference and found false.
    Violated,
    /// Not checked.
    Assumed,
}

impl BoundHypothesis {
    pub fn is_valid(self) -> bool {
        matches!(self, BoundHypothesis::Holds | BoundHypothesis::Verified)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PhaseTimings {
    pub select_ns: u64,
    pub compute_ns: u64,
    pub reference_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QdotReport {
    pub value: f64,
    pub n: usize,
    pub n_bins: usize,
    pub counts: PrecisionCounts,
    /// `sum_k M_k 2^(u_k + 2) eps(k)`.
    pub abs_bound: f64,
    /// `sum_k M_k 2^(u_k - e_max + 2) eps(k)`.
    pub rel_bound: f64,
    pub hypothesis: BoundHypothesis,
    /// `sum_k M_k 2^(u_k - E + 2) eps(k)` with `E = flexp(x . y)`; only known
    /// when an exact reference was computed.
    pub rel_bound_e: Option<f64>,
    pub early_terminated: bool,
    pub timings: PhaseTimings,
}

impl QdotReport {
    fn empty() -> Self {
        QdotReport {
            value: 0.0,
            n: 0,
            n_bins: 0,
            counts: PrecisionCounts::default(),
            abs_bound: 0.0,
            rel_bound: 0.0,
            hypothesis: BoundHypothesis::Holds,
            rel_bound_e: None,
            early_terminated: false,
            timings: PhaseTimings::default(),
        }
    }
}

/// Approximate `x . y` within the tolerance in `cfg`.
pub fn qdot(x: &[f64], y: &[f64], cfg: ToleranceConfig, strategy: Strategy) -> Result<QdotReport> {
    run(x, y, cfg, strategy).map(|(report, _)| report)
}

fn run(
    x: &[f64],
    y: &[f64],
    cfg: ToleranceConfig,
    strategy: Strategy,
) -> Result<(QdotReport, Option<ParameterSet>)> {
    if x.len() != y.len() {
        return Err(QdotError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.is_empty() {
        cfg.validate()?;
        return Ok((QdotReport::empty(), None));
    }

    let t0 = Instant::now();
    let params = select_parameters(x, y, cfg, strategy)?;
    let t1 = Instant::now();
    let value = compute(x, y, &params)?;
    let t2 = Instant::now();

    let report = QdotReport {
        value,
        n: params.n,
        n_bins: params.bins.len(),
        counts: params.counts(),
        abs_bound: params.abs_bound(),
        rel_bound: params.rel_bound(),
        hypothesis: if params.sign_uniform {
            BoundHypothesis::Holds
        } else {
            BoundHypothesis::Assumed
        },
        rel_bound_e: None,
        early_terminated: params.early_terminated,
        timings: PhaseTimings {
            select_ns: (t1 - t0).as_nanos() as u64,
            compute_ns: (t2 - t1).as_nanos() as u64,
            reference_ns: 0,
        },
    };
    Ok((report, Some(params)))
}

/// [`qdot`] plus an exact reference: fills in the `E`-based bound, checks the
/// relative-bound hypothesis and times the reference.
pub fn qdot_verified(
    x: &[f64],
    y: &[f64],
    cfg: ToleranceConfig,
    strategy: Strategy,
) -> Result<(QdotReport, Reference)> {
    let (mut report, params) = run(x, y, cfg, strategy)?;
    let t0 = Instant::now();
    let reference = reference_dot(x, y)?;
    report.timings.reference_ns = t0.elapsed().as_nanos() as u64;

    if let Some(params) = params.filter(|p| !p.bins.is_empty()) {
        if let Some(e) = reference.flexp {
            report.rel_bound_e = Some(params.bound_relative_to(e));
        }
        if report.hypothesis != BoundHypothesis::Holds {
            report.hypothesis = match reference.flexp {
                Some(e) if params.e_max <= e => BoundHypothesis::Verified,
                _ => BoundHypothesis::Violated,
            };
        }
    }
    Ok((report, reference))
}

/// Verification reference for `x . y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reference {
    /// Correctly rounded exact dot product.
    pub value: f64,
    /// `flexp(value)`, `None` when the exact sum is zero.
    pub flexp: Option<i32>,
    /// Plain left-to-right binary64 dot product (the usual baseline kernel).
    pub naive: f64,
}

/// Exact dot product through error-free products and exact summation.
///
/// Products that underflow into the subnormal range lose their low part; the
/// result is exact otherwise.
pub fn reference_dot(x: &[f64], y: &[f64]) -> Result<Reference> {
    if x.len() != y.len() {
        return Err(QdotError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let mut acc = ExactSum::new();
    for (&a, &b) in x.iter().zip(y) {
        let (hi, lo) = two_prod(a, b);
        if !hi.is_finite() {
            return Err(QdotError::Overflow);
        }
        acc.add(hi);
        if lo != 0.0 {
            acc.add(lo);
        }
    }
    let value = acc.value().ok_or(QdotError::Overflow)?;
    Ok(Reference {
        value,
        flexp: (value != 0.0).then(|| flexp_unchecked(value)),
        naive: naive_dot(x, y),
    })
}

/// Left-to-right binary64 dot product.
pub fn naive_dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).fold(0.0, |acc, (a, b)| acc + a * b)
}

/// `|reference - value| / |reference|`, with `0/0` read as 0.
pub fn relative_error(reference: f64, value: f64) -> f64 {
    let diff = (reference - value).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / reference.abs()
    }
}
