//! Approximation quality metrics.

/// Tolerance slack left over: `epsilon - relerr`. Negative means the
/// tolerance was missed.
pub fn effectiveness(epsilon: f64, relerr: f64) -> f64 {
    epsilon - relerr
}

/// `T_exact / T_approx`.
pub fn speedup(reference_ns: u64, approx_ns: u64) -> f64 {
    reference_ns as f64 / approx_ns.max(1) as f64
}

/// Share of the approximate kernel's run time spent computing rather than
/// selecting parameters: `T_compute / (T_select + T_compute)`.
pub fn efficiency(select_ns: u64, compute_ns: u64) -> f64 {
    let compute = compute_ns.max(1) as f64;
    compute / (select_ns.max(1) as f64 + compute)
}
