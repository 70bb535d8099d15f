//! Sorted bin initialization and the exact / ranged / split binning strategies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::float_bits::ExponentSummary;
use crate::{QdotError, Result};

/// Exponent bin `(lower, upper]`: component indices whose exponent sum `e_i`
/// satisfies `lower < e_i <= upper`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bin {
    pub lower: i32,
    pub upper: i32,
    /// Original component indices, ascending.
    pub indices: Vec<usize>,
}

impl Bin {
    /// `M_k`, the number of members.
    pub fn cardinality(&self) -> usize {
        self.indices.len()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Singleton intervals `(u - 1, u]`, one per distinct exponent sum.
    #[default]
    Exact,
    /// Fixed-width intervals anchored at `e_min`.
    Ranged(u32),
    /// Recursive halving of the sorted index list, up to the given depth.
    Split(u32),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Exact => f.write_str("exact"),
            Strategy::Ranged(w) => write!(f, "ranged:{w}"),
            Strategy::Split(s) => write!(f, "split:{s}"),
        }
    }
}

impl FromStr for Strategy {
    type Err = QdotError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || QdotError::InvalidParameter(format!("unknown binning strategy `{s}`"));
        match s.split_once(':') {
            None if s == "exact" => Ok(Strategy::Exact),
            Some(("ranged", w)) => {
                let w: u32 = w.parse().map_err(|_| bad())?;
                if w == 0 {
                    return Err(QdotError::InvalidParameter(
                        "ranged width must be >= 1".into(),
                    ));
                }
                Ok(Strategy::Ranged(w))
            }
            Some(("split", d)) => Ok(Strategy::Split(d.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

/// Bins ordered by ascending `upper`, covering `[e_min, e_max]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinPartition {
    pub bins: Vec<Bin>,
    pub strategy: Strategy,
    pub e_min: i32,
    pub e_max: i32,
}

impl BinPartition {
    /// True when both partitions group the same indices under the same
    /// upper exponents. Lower edges are ignored since scores depend only on
    /// `u_k` and `M_k`.
    pub fn same_grouping(&self, other: &BinPartition) -> bool {
        self.bins.len() == other.bins.len()
            && self
                .bins
                .iter()
                .zip(&other.bins)
                .all(|(a, b)| a.upper == b.upper && a.indices == b.indices)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortMethod {
    Counting,
    Comparison,
}

/// Counting sort wins once the exponent range is at most `n log2(n/2)`.
pub fn choose_sort(n: usize, e_min: i32, e_max: i32) -> SortMethod {
    let range = (e_max as i64 - e_min as i64 + 1) as f64;
    if n < 2 {
        return SortMethod::Comparison;
    }
    let n = n as f64;
    if range <= n * (n / 2.0).log2() {
        SortMethod::Counting
    } else {
        SortMethod::Comparison
    }
}

/// Component indices sorted by exponent sum, plus the exponent histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedInit {
    /// Original indices ordered by non-decreasing `e`, ties by ascending index.
    pub order: Vec<usize>,
    /// Exponent sums in the same order as `order`.
    pub sorted_e: Vec<i16>,
    /// `counts[v - e_min]` is the number of components with exponent sum `v`.
    pub counts: Vec<u32>,
    /// Cumulative offsets into `order`; `offsets.len() == counts.len() + 1`.
    pub offsets: Vec<usize>,
    pub e_min: i32,
    pub method: SortMethod,
}

impl SortedInit {
    /// Positions in `order` holding exponent sum `v`.
    pub fn slice_of(&self, v: i32) -> std::ops::Range<usize> {
        let k = (v - self.e_min) as usize;
        self.offsets[k]..self.offsets[k + 1]
    }
}

pub fn sorted_bin_init(summary: &ExponentSummary) -> SortedInit {
    let method = choose_sort(summary.e.len(), summary.e_min, summary.e_max);
    sorted_bin_init_with(summary, method)
}

/// Same as [`sorted_bin_init`] with an explicit sort back end. Both back ends
/// produce identical output.
pub fn sorted_bin_init_with(summary: &ExponentSummary, method: SortMethod) -> SortedInit {
    let e = &summary.e;
    let e_min = summary.e_min;
    let width = if e.is_empty() {
        0
    } else {
        (summary.e_max - e_min + 1) as usize
    };

    let (positions, counts) = match method {
        SortMethod::Counting => {
            let mut counts = vec![0u32; width];
            for &v in e {
                counts[(v as i32 - e_min) as usize] += 1;
            }
            let mut next = Vec::with_capacity(width);
            let mut acc = 0usize;
            for &c in &counts {
                next.push(acc);
                acc += c as usize;
            }
            let mut positions = vec![0usize; e.len()];
            for (p, &v) in e.iter().enumerate() {
                let slot = &mut next[(v as i32 - e_min) as usize];
                positions[*slot] = p;
                *slot += 1;
            }
            (positions, counts)
        }
        SortMethod::Comparison => {
            let mut positions: Vec<usize> = (0..e.len()).collect();
            // stable, so ties stay in ascending position order
            positions.sort_by_key(|&p| e[p]);
            let mut counts = vec![0u32; width];
            for &p in &positions {
                counts[(e[p] as i32 - e_min) as usize] += 1;
            }
            (positions, counts)
        }
    };

    let mut offsets = Vec::with_capacity(width + 1);
    offsets.push(0);
    for &c in &counts {
        offsets.push(offsets.last().unwrap() + c as usize);
    }
    SortedInit {
        order: positions.iter().map(|&p| summary.nonzero_idx[p]).collect(),
        sorted_e: positions.iter().map(|&p| e[p]).collect(),
        counts,
        offsets,
        e_min,
        method,
    }
}

/// Builds the partition for `strategy`.
pub fn make_bins(
    summary: &ExponentSummary,
    init: &SortedInit,
    strategy: Strategy,
) -> Result<BinPartition> {
    match strategy {
        Strategy::Exact => Ok(exact_bins(summary, init)),
        Strategy::Ranged(w) => ranged_bins(summary, init, w),
        Strategy::Split(s) => Ok(split_bins(summary, init, s)),
    }
}

/// One bin `(v - 1, v]` per exponent sum `v` that occurs.
pub fn exact_bins(summary: &ExponentSummary, init: &SortedInit) -> BinPartition {
    let bins = init
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(k, _)| {
            let v = init.e_min + k as i32;
            Bin {
                lower: v - 1,
                upper: v,
                indices: init.order[init.slice_of(v)].to_vec(),
            }
        })
        .collect();
    BinPartition {
        bins,
        strategy: Strategy::Exact,
        e_min: summary.e_min,
        e_max: summary.e_max,
    }
}

/// Intervals `(u_k - w, u_k]` with `u_k = e_min + k*w - 1`; empty ones dropped.
pub fn ranged_bins(summary: &ExponentSummary, init: &SortedInit, w: u32) -> Result<BinPartition> {
    if w == 0 {
        return Err(QdotError::InvalidParameter(
            "ranged width must be >= 1".into(),
        ));
    }
    let w = w as usize;
    let mut bins = Vec::new();
    for (chunk_idx, chunk) in init.counts.chunks(w).enumerate() {
        let start = chunk_idx * w;
        let lo = init.offsets[start];
        let hi = init.offsets[start + chunk.len()];
        if lo == hi {
            continue;
        }
        let mut indices = init.order[lo..hi].to_vec();
        indices.sort_unstable();
        let upper = summary.e_min + ((chunk_idx + 1) * w) as i32 - 1;
        bins.push(Bin {
            lower: upper - w as i32,
            upper,
            indices,
        });
    }
    Ok(BinPartition {
        bins,
        strategy: Strategy::Ranged(w as u32),
        e_min: summary.e_min,
        e_max: summary.e_max,
    })
}

/// Recursive halving of the sorted index list, `levels` times.
///
/// A halving point that falls inside a run of equal exponent sums moves
/// forward to the end of that run (or disappears), so leaves never share an
/// exponent value. The adjustment is monotone, which makes the partition at
/// depth `s + 1` a refinement of the one at depth `s`.
pub fn split_bins(summary: &ExponentSummary, init: &SortedInit, levels: u32) -> BinPartition {
    let m = init.order.len();
    let mut cuts = Vec::new();
    collect_cuts(0, m, 0, levels, &mut cuts);

    let se = &init.sorted_e;
    let mut snapped: Vec<usize> = cuts
        .into_iter()
        .filter_map(|c| (c..m).find(|&p| se[p - 1] != se[p]))
        .collect();
    snapped.sort_unstable();
    snapped.dedup();
    snapped.push(m);

    let mut bins = Vec::with_capacity(snapped.len());
    let mut start = 0;
    let mut lower = summary.e_min - 1;
    for end in snapped {
        if end == start {
            continue;
        }
        let upper = se[end - 1] as i32;
        let mut indices = init.order[start..end].to_vec();
        indices.sort_unstable();
        bins.push(Bin {
            lower,
            upper,
            indices,
        });
        lower = upper;
        start = end;
    }
    BinPartition {
        bins,
        strategy: Strategy::Split(levels),
        e_min: summary.e_min,
        e_max: summary.e_max,
    }
}

fn collect_cuts(start: usize, end: usize, level: u32, max_level: u32, cuts: &mut Vec<usize>) {
    let m = end - start;
    if level >= max_level || m <= 1 {
        return;
    }
    let mid = start + m / 2;
    cuts.push(mid);
    collect_cuts(start, mid, level + 1, max_level, cuts);
    collect_cuts(mid, end, level + 1, max_level, cuts);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::float_bits::exponent_preprocess;

    fn summary_of(e: &[i16]) -> ExponentSummary {
        ExponentSummary {
            e: e.to_vec(),
            nonzero_idx: (0..e.len()).collect(),
            zero_idx: vec![],
            e_min: *e.iter().min().unwrap() as i32,
            e_max: *e.iter().max().unwrap() as i32,
            n: e.len(),
            sign_uniform: true,
        }
    }

    fn uppers(p: &BinPartition) -> Vec<i32> {
        p.bins.iter().map(|b| b.upper).collect()
    }

    const TOY: [i16; 4] = [50, -6, 4, 17];

    #[test]
    fn choose_sort_examples() {
        assert_eq!(choose_sort(1000, 0, 2047), SortMethod::Counting);
        assert_eq!(choose_sort(287, 0, 2047), SortMethod::Counting);
        assert_eq!(choose_sort(286, 0, 2047), SortMethod::Comparison);
        assert_eq!(choose_sort(4, 0, 2047), SortMethod::Comparison);
    }

    #[test]
    fn sorted_init_examples() {
        for method in [SortMethod::Counting, SortMethod::Comparison] {
            let s = summary_of(&TOY);
            let init = sorted_bin_init_with(&s, method);
            assert_eq!(init.order, vec![1, 2, 3, 0]);
            for v in [-6, 4, 17, 50] {
                assert_eq!(init.counts[(v + 6) as usize], 1);
            }
            assert_eq!(init.counts.iter().sum::<u32>(), 4);

            assert_eq!(
                sorted_bin_init_with(&summary_of(&[7, 7, 7]), method).order,
                vec![0, 1, 2]
            );
            assert_eq!(
                sorted_bin_init_with(&summary_of(&[3, 1, 2, 1]), method).order,
                vec![1, 3, 2, 0]
            );
        }
    }

    #[test]
    fn sorted_init_maps_back_to_original_indices() {
        let s = exponent_preprocess(&[4.0, 0.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        let init = sorted_bin_init(&s);
        assert_eq!(init.order, vec![2, 0]);
    }

    #[test]
    fn exact_examples() {
        let s = summary_of(&TOY);
        let p = exact_bins(&s, &sorted_bin_init(&s));
        assert_eq!(uppers(&p), vec![-6, 4, 17, 50]);
        assert!(p
            .bins
            .iter()
            .all(|b| b.cardinality() == 1 && b.lower == b.upper - 1));

        let s = summary_of(&[0, 0, 0]);
        let p = exact_bins(&s, &sorted_bin_init(&s));
        assert_eq!(p.bins.len(), 1);
        assert_eq!(p.bins[0].cardinality(), 3);

        let s = summary_of(&[2, 5, 2]);
        let p = exact_bins(&s, &sorted_bin_init(&s));
        assert_eq!(
            p.bins[0],
            Bin {
                lower: 1,
                upper: 2,
                indices: vec![0, 2]
            }
        );
        assert_eq!(
            p.bins[1],
            Bin {
                lower: 4,
                upper: 5,
                indices: vec![1]
            }
        );
    }

    #[test]
    fn ranged_examples() {
        let s = summary_of(&TOY);
        let init = sorted_bin_init(&s);
        let exact = exact_bins(&s, &init);
        assert_eq!(ranged_bins(&s, &init, 1).unwrap().bins, exact.bins);

        let s2 = summary_of(&[0, 1, 2, 3]);
        let p = ranged_bins(&s2, &sorted_bin_init(&s2), 2).unwrap();
        assert_eq!(
            p.bins[0],
            Bin {
                lower: -1,
                upper: 1,
                indices: vec![0, 1]
            }
        );
        assert_eq!(
            p.bins[1],
            Bin {
                lower: 1,
                upper: 3,
                indices: vec![2, 3]
            }
        );

        let p = ranged_bins(&s, &init, 60).unwrap();
        assert_eq!(p.bins.len(), 1);
        assert_eq!(p.bins[0].upper, 53);
        assert_eq!(p.bins[0].indices, vec![0, 1, 2, 3]);

        assert!(ranged_bins(&s, &init, 0).is_err());
    }

    #[test]
    fn split_examples() {
        let s = summary_of(&TOY);
        let init = sorted_bin_init(&s);
        let p0 = split_bins(&s, &init, 0);
        assert_eq!(uppers(&p0), vec![50]);
        assert_eq!(p0.bins[0].cardinality(), 4);

        let p1 = split_bins(&s, &init, 1);
        assert_eq!(uppers(&p1), vec![4, 50]);
        assert_eq!(p1.bins[0].indices, vec![1, 2]);
        assert_eq!(p1.bins[1].indices, vec![0, 3]);
        assert_eq!(p1.bins[1].lower, 4);

        let p2 = split_bins(&s, &init, 2);
        assert!(p2.same_grouping(&exact_bins(&s, &init)));
        let lowers: Vec<i32> = p2.bins.iter().map(|b| b.lower).collect();
        assert_eq!(lowers, vec![-7, -6, 4, 17]);
    }

    #[test]
    fn split_never_cuts_a_run_of_equal_exponents() {
        let s = summary_of(&[2, 2, 2, 2, 5]);
        let p = split_bins(&s, &sorted_bin_init(&s), 3);
        assert_eq!(uppers(&p), vec![2, 5]);
        assert_eq!(p.bins[0].indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn strategy_parse_roundtrip() {
        for s in [Strategy::Exact, Strategy::Ranged(3), Strategy::Split(4)] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("ranged:0".parse::<Strategy>().is_err());
        assert!("bogus".parse::<Strategy>().is_err());
    }
}
