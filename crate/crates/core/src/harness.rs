//! Synthetic inputs and the bound-tightness / tolerance-sweep experiments.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::float_bits::scale_pow2;
use crate::kernel::{qdot_verified, relative_error};
use crate::metrics;
use crate::{QdotError, Result, SplitMode, Strategy, ToleranceConfig};

/// Exponent distribution of the synthetic components `s * 2^p`, `s ~ U[0.5, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    /// `p` uniform over the integers in `[-floor(t/2), floor(t/2)]`.
    UniformExp,
    /// `p = round(g)`, `g ~ Normal(0, t/2)` (standard deviation).
    NormalExp,
}

impl Family {
    /// Exponent-parameter grids used by the tightness experiment.
    pub fn default_t_grid(self) -> Vec<f64> {
        match self {
            Family::UniformExp => (2..=20).map(|i| 5.0 * i as f64).collect(),
            Family::NormalExp => (1..=15).map(|i| 2.0 * i as f64).collect(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::UniformExp => "A",
            Family::NormalExp => "B",
        })
    }
}

impl FromStr for Family {
    type Err = QdotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" | "uniform" => Ok(Family::UniformExp),
            "B" | "b" | "normal" => Ok(Family::NormalExp),
            _ => Err(QdotError::InvalidParameter(format!(
                "unknown distribution family `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistSpec {
    pub family: Family,
    pub t: f64,
    pub n: usize,
    pub seed: u64,
}

/// Draws `(x, y)` for `spec`. Same spec, same vectors.
pub fn generate(spec: &DistSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(spec.t >= 0.0 && spec.t.is_finite()) {
        return Err(QdotError::InvalidParameter(format!(
            "distribution parameter t must be finite and non-negative, got {}",
            spec.t
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = sample(spec, &mut rng);
    let y = sample(spec, &mut rng);
    Ok((x, y))
}

fn sample(spec: &DistSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match spec.family {
        Family::UniformExp => {
            let half = (spec.t / 2.0).floor() as i32;
            (0..spec.n)
                .map(|_| {
                    let s: f64 = rng.random_range(0.5..1.0);
                    let p = rng.random_range(-half..=half);
                    scale_pow2(s, p)
                })
                .collect()
        }
        Family::NormalExp => {
            let normal = Normal::new(0.0, 0.5 * spec.t).expect("finite non-negative std dev");
            (0..spec.n)
                .map(|_| {
                    let s: f64 = rng.random_range(0.5..1.0);
                    let p = normal.sample(rng).round() as i32;
                    scale_pow2(s, p)
                })
                .collect()
        }
    }
}

/// Whether a trial uses two independent vectors or `x . x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Pairing {
    Independent,
    /// `y = x`; the relative bound's hypothesis always holds.
    Same,
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pairing::Independent => "independent",
            Pairing::Same => "same",
        })
    }
}

impl FromStr for Pairing {
    type Err = QdotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" | "xy" => Ok(Pairing::Independent),
            "same" | "xx" => Ok(Pairing::Same),
            _ => Err(QdotError::InvalidParameter(format!(
                "unknown pairing `{s}`"
            ))),
        }
    }
}

/// One cell of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub family: Family,
    pub t: f64,
    pub n: usize,
    pub pairing: Pairing,
    pub epsilon: f64,
    pub split: SplitMode,
    pub strategy: Strategy,
}

/// Experiment grid: the cartesian product of every axis, `trials` runs per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub families: Vec<(Family, Vec<f64>)>,
    pub sizes: Vec<usize>,
    pub pairings: Vec<Pairing>,
    pub epsilons: Vec<f64>,
    pub splits: Vec<SplitMode>,
    pub strategy: Strategy,
    pub trials: usize,
    pub seed: u64,
}

impl Grid {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for (family, ts) in &self.families {
            for &t in ts {
                for &n in &self.sizes {
                    for &pairing in &self.pairings {
                        for &epsilon in &self.epsilons {
                            for &split in &self.splits {
                                out.push(Cell {
                                    family: *family,
                                    t,
                                    n,
                                    pairing,
                                    epsilon,
                                    split,
                                    strategy: self.strategy,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// One trial. Column order matches the CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub family: String,
    pub t: f64,
    pub n: usize,
    pub trial: usize,
    pub epsilon: f64,
    pub split: String,
    pub strategy: String,
    pub value: f64,
    pub reference: f64,
    pub relerr: f64,
    pub rel_bound: f64,
    pub abs_bound: f64,
    pub tightness: f64,
    pub pct_perforate: f64,
    pub pct_half: f64,
    pub pct_single: f64,
    pub pct_double: f64,
    pub t_select_ns: u64,
    pub t_compute_ns: u64,
    pub t_reference_ns: u64,
}

/// Diagnostics kept beside each record but not written to the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub record: MetricRecord,
    pub pairing: Pairing,
    /// `|reference - value| <= abs_bound`.
    pub abs_ok: bool,
    /// Relative bound applies (hypothesis holds or verified).
    pub rel_applicable: bool,
    /// `relerr <= rel_bound`, or the `E`-based bound when the hypothesis fails.
    pub rel_ok: bool,
    /// Relative bound derived from `flexp` of the exact result.
    pub rel_bound_e: Option<f64>,
}

impl TrialOutcome {
    pub fn effectiveness(&self) -> f64 {
        metrics::effectiveness(self.record.epsilon, self.record.relerr)
    }

    pub fn efficiency(&self) -> f64 {
        metrics::efficiency(self.record.t_select_ns, self.record.t_compute_ns)
    }

    /// Reference kernel time over approximate kernel time (selection included).
    pub fn speedup(&self) -> f64 {
        metrics::speedup(
            self.record.t_reference_ns,
            self.record.t_select_ns + self.record.t_compute_ns,
        )
    }

    pub fn sound(&self) -> bool {
        self.abs_ok && self.rel_ok
    }
}

/// Seed of trial `trial` in cell `cell`.
pub fn trial_seed(seed: u64, cell: usize, trial: usize) -> u64 {
    seed ^ ((cell as u64) << 32 | trial as u64)
}

/// Runs one trial of `cell`.
pub fn run_trial(cell: &Cell, trial: usize, seed: u64) -> Result<TrialOutcome> {
    let spec = DistSpec {
        family: cell.family,
        t: cell.t,
        n: cell.n,
        seed,
    };
    let (x, y) = generate(&spec)?;
    let y = match cell.pairing {
        Pairing::Same => x.clone(),
        Pairing::Independent => y,
    };
    let cfg = ToleranceConfig::new(cell.epsilon, cell.split)?;
    let (report, reference) = qdot_verified(&x, &y, cfg, cell.strategy)?;

    let relerr = relative_error(reference.value, report.value);
    let abs_err = (reference.value - report.value).abs();
    let rel_applicable = report.hypothesis.is_valid();
    let rel_ok = if rel_applicable {
        relerr <= report.rel_bound
    } else {
        report.rel_bound_e.is_none_or(|b| relerr <= b)
    };
    let [pct_perforate, pct_half, pct_single, pct_double] = report.counts.percentages();
    Ok(TrialOutcome {
        record: MetricRecord {
            family: cell.family.to_string(),
            t: cell.t,
            n: cell.n,
            trial,
            epsilon: cell.epsilon,
            split: cell.split.to_string(),
            strategy: cell.strategy.to_string(),
            value: report.value,
            reference: reference.value,
            relerr,
            rel_bound: report.rel_bound,
            abs_bound: report.abs_bound,
            tightness: report.rel_bound - relerr,
            pct_perforate,
            pct_half,
            pct_single,
            pct_double,
            t_select_ns: report.timings.select_ns,
            t_compute_ns: report.timings.compute_ns,
            t_reference_ns: report.timings.reference_ns,
        },
        pairing: cell.pairing,
        abs_ok: abs_err <= report.abs_bound,
        rel_applicable,
        rel_ok,
        rel_bound_e: report.rel_bound_e,
    })
}

/// Every trial of every cell, ordered by `(cell, trial)` whatever order the
/// threads finish in.
pub fn run_grid(grid: &Grid) -> Result<Vec<TrialOutcome>> {
    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.trials).map(move |t| (c, t)))
        .collect();
    jobs.par_iter()
        .map(|&(c, t)| run_trial(&cells[c], t, trial_seed(grid.seed, c, t)))
        .collect()
}

/// Bound-tightness experiment at a single tolerance.
pub fn run_tightness(grid: &Grid, epsilon: f64) -> Result<Vec<TrialOutcome>> {
    let grid = Grid {
        epsilons: vec![epsilon],
        ..grid.clone()
    };
    run_grid(&grid)
}

/// Per-cell aggregate of a tolerance sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub family: String,
    pub t: f64,
    pub n: usize,
    pub pairing: String,
    pub epsilon: f64,
    pub split: String,
    pub trials: usize,
    pub relerr_mean: f64,
    pub relerr_min: f64,
    pub relerr_max: f64,
    pub effectiveness_mean: f64,
    pub pct_perforate_mean: f64,
    pub pct_half_mean: f64,
    pub pct_single_mean: f64,
    pub pct_double_mean: f64,
    pub speedup_mean: f64,
    pub efficiency_mean: f64,
}

/// Effectiveness / speedup sweep: runs the grid and summarizes each cell.
pub fn run_sweep(grid: &Grid) -> Result<(Vec<TrialOutcome>, Vec<SweepSummary>)> {
    let outcomes = run_grid(grid)?;
    let summaries = summarize(&outcomes, grid.trials);
    Ok((outcomes, summaries))
}

/// Mean/min/max of consecutive groups of `per_cell` outcomes.
pub fn summarize(outcomes: &[TrialOutcome], per_cell: usize) -> Vec<SweepSummary> {
    if per_cell == 0 {
        return Vec::new();
    }
    outcomes
        .chunks(per_cell)
        .map(|chunk| {
            let first = &chunk[0];
            let k = chunk.len() as f64;
            let mean = |f: &dyn Fn(&TrialOutcome) -> f64| chunk.iter().map(f).sum::<f64>() / k;
            let relerrs = chunk.iter().map(|o| o.record.relerr);
            SweepSummary {
                family: first.record.family.clone(),
                t: first.record.t,
                n: first.record.n,
                pairing: first.pairing.to_string(),
                epsilon: first.record.epsilon,
                split: first.record.split.clone(),
                trials: chunk.len(),
                relerr_mean: mean(&|o| o.record.relerr),
                relerr_min: relerrs.clone().fold(f64::INFINITY, f64::min),
                relerr_max: relerrs.fold(0.0, f64::max),
                effectiveness_mean: mean(&|o| o.effectiveness()),
                pct_perforate_mean: mean(&|o| o.record.pct_perforate),
                pct_half_mean: mean(&|o| o.record.pct_half),
                pct_single_mean: mean(&|o| o.record.pct_single),
                pct_double_mean: mean(&|o| o.record.pct_double),
                speedup_mean: mean(&|o| o.speedup()),
                efficiency_mean: mean(&|o| o.efficiency()),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::float_bits::flexp;

    fn spec(family: Family, t: f64, n: usize, seed: u64) -> DistSpec {
        DistSpec { family, t, n, seed }
    }

    #[test]
    fn t_zero_stays_in_unit_interval() {
        for family in [Family::UniformExp, Family::NormalExp] {
            let (x, y) = generate(&spec(family, 0.0, 1000, 1)).unwrap();
            assert!(x.iter().chain(&y).all(|v| (0.5..1.0).contains(v)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&spec(Family::NormalExp, 13.0, 500, 42)).unwrap();
        let b = generate(&spec(Family::NormalExp, 13.0, 500, 42)).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec(Family::NormalExp, 13.0, 500, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_exponent_range() {
        let (x, y) = generate(&spec(Family::UniformExp, 100.0, 100_000, 7)).unwrap();
        let e: Vec<i32> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| flexp(*a).unwrap() + flexp(*b).unwrap())
            .collect();
        let range = e.iter().max().unwrap() - e.iter().min().unwrap();
        assert!((150..=202).contains(&range), "{range}");
    }

    #[test]
    fn negative_t_rejected() {
        assert!(generate(&spec(Family::UniformExp, -1.0, 10, 0)).is_err());
        assert!(generate(&spec(Family::NormalExp, f64::NAN, 10, 0)).is_err());
    }

    #[test]
    fn family_names() {
        assert_eq!("A".parse::<Family>().unwrap(), Family::UniformExp);
        assert_eq!(Family::NormalExp.to_string(), "B");
        assert_eq!(Family::UniformExp.default_t_grid().len(), 19);
        assert_eq!(Family::NormalExp.default_t_grid().len(), 15);
    }

    #[test]
    fn small_grid_is_sound_and_ordered() {
        let grid = Grid {
            families: vec![
                (Family::NormalExp, vec![13.0]),
                (Family::UniformExp, vec![20.0]),
            ],
            sizes: vec![1000],
            pairings: vec![Pairing::Same, Pairing::Independent],
            epsilons: vec![1e-8],
            splits: vec![SplitMode::PerBin],
            strategy: Strategy::Exact,
            trials: 5,
            seed: 9,
        };
        let out = run_grid(&grid).unwrap();
        assert_eq!(out.len(), 20);
        for (i, o) in out.iter().enumerate() {
            assert_eq!(o.record.trial, i % 5);
            assert!(o.sound(), "{:?}", o.record);
            if o.pairing == Pairing::Same {
                assert!(o.record.relerr <= 1e-8);
                assert!(o.record.tightness >= 0.0);
            }
        }
        let sums = summarize(&out, 5);
        assert_eq!(sums.len(), 4);
        assert!(sums
            .iter()
            .all(|s| s.efficiency_mean > 0.0 && s.efficiency_mean < 1.0));
    }
}
