//! Conjugate gradient and power iteration with their dot products computed
//! by [`qdot`](crate::qdot), plus the test problems they run on.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::kernel::{naive_dot, qdot};
use crate::sparse::SparseMatrix;
use crate::{PrecisionCounts, QdotError, Result, SplitMode, Strategy, ToleranceConfig};

/// 27-point stencil on an `nx x ny x nz` grid: 27 on the diagonal, -1 for
/// every neighbour inside the grid. The right-hand side makes the all-ones
/// vector the exact solution.
pub fn gen_stencil(nx: usize, ny: usize, nz: usize) -> Result<(SparseMatrix, Vec<f64>)> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(QdotError::InvalidParameter(format!(
            "stencil dimensions must be at least 1, got {nx}x{ny}x{nz}"
        )));
    }
    let n = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .ok_or_else(|| QdotError::InvalidParameter("stencil too large".into()))?;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(27 * n);
    let mut values = Vec::with_capacity(27 * n);
    let mut rhs = Vec::with_capacity(n);
    row_ptr.push(0);
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let row = ix + nx * (iy + ny * iz);
                let mut sum = 0.0;
                for dz in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (x, y, z) = (ix as i64 + dx, iy as i64 + dy, iz as i64 + dz);
                            if x < 0
                                || y < 0
                                || z < 0
                                || x >= nx as i64
                                || y >= ny as i64
                                || z >= nz as i64
                            {
                                continue;
                            }
                            let col = x as usize + nx * (y as usize + ny * z as usize);
                            let v = if col == row { 27.0 } else { -1.0 };
                            col_idx.push(col);
                            values.push(v);
                            sum += v;
                        }
                    }
                }
                row_ptr.push(col_idx.len());
                rhs.push(sum);
            }
        }
    }
    let a = SparseMatrix {
        n,
        row_ptr,
        col_idx,
        values,
        symmetric: true,
    };
    Ok((a, rhs))
}

/// Laplacian `D - A` of an Erdős–Rényi graph `G(n, edge_prob)`.
pub fn gen_graph_laplacian(n: usize, edge_prob: f64, seed: u64) -> Result<SparseMatrix> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(QdotError::InvalidParameter(format!(
            "edge probability must lie in [0, 1], got {edge_prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut degree = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            if edge_prob == 1.0 || (edge_prob > 0.0 && rng.random::<f64>() < edge_prob) {
                rows[i].push((j, -1.0));
                rows[j].push((i, -1.0));
                degree[i] += 1.0;
                degree[j] += 1.0;
            }
        }
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row.push((i, degree[i]));
    }
    SparseMatrix::from_rows(rows, true)
}

/// Start vector for power iteration: entries uniform in `[0.5, 1.5)`, unit
/// 2-norm.
pub fn default_power_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let norm = naive_dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CallSite {
    /// `r^T r` in CG.
    RtR,
    /// `p^T A p` in CG.
    PtAp,
    /// Normalization `x^T x` in power iteration.
    XtX,
    /// Eigenvalue estimate `x_k^T x_{k+1}` in power iteration.
    XtAx,
}

impl fmt::Display for CallSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CallSite::RtR => "rTr",
            CallSite::PtAp => "pTAp",
            CallSite::XtX => "xTx",
            CallSite::XtAx => "xTAx",
        })
    }
}

/// One dot-product call inside a solver iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub call_site: String,
    pub pct_perforate: f64,
    pub pct_half: f64,
    pub pct_single: f64,
    pub pct_double: f64,
    /// Residual norm after this call (CG) or the eigenvalue estimate (power).
    pub resid_or_lambda: f64,
}

impl TraceRow {
    fn new(iter: usize, site: CallSite, counts: &PrecisionCounts, value: f64) -> Self {
        let [pct_perforate, pct_half, pct_single, pct_double] = counts.percentages();
        TraceRow {
            iter,
            call_site: site.to_string(),
            pct_perforate,
            pct_half,
            pct_single,
            pct_double,
            resid_or_lambda: value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveTrace {
    fn new(epsilon: f64) -> Self {
        SolveTrace {
            rows: Vec::new(),
            epsilon,
            iterations: 0,
            converged: false,
        }
    }

    pub fn rows_at(&self, site: CallSite) -> impl Iterator<Item = &TraceRow> {
        let name = site.to_string();
        self.rows.iter().filter(move |r| r.call_site == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub max_iters: usize,
    pub epsilon: f64,
    pub split: SplitMode,
    pub strategy: Strategy,
}

impl SolverConfig {
    fn tolerance(&self) -> Result<ToleranceConfig> {
        if !(self.tau >= 0.0) {
            return Err(QdotError::InvalidParameter(format!(
                "tau must be non-negative, got {}",
                self.tau
            )));
        }
        ToleranceConfig::new(self.epsilon, self.split)
    }
}

/// Dot-product provider shared by the approximate and reference solvers.
trait Dot {
    fn dot(&self, x: &[f64], y: &[f64]) -> Result<(f64, Option<PrecisionCounts>)>;
}

struct Approx(ToleranceConfig, Strategy);

impl Dot for Approx {
    fn dot(&self, x: &[f64], y: &[f64]) -> Result<(f64, Option<PrecisionCounts>)> {
        let r = qdot(x, y, self.0, self.1)?;
        Ok((r.value, Some(r.counts)))
    }
}

struct Exact;

impl Dot for Exact {
    fn dot(&self, x: &[f64], y: &[f64]) -> Result<(f64, Option<PrecisionCounts>)> {
        Ok((naive_dot(x, y), None))
    }
}

fn all_double(n: usize) -> PrecisionCounts {
    PrecisionCounts {
        double: n,
        ..PrecisionCounts::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub trace: SolveTrace,
    /// `||b - A x||` recomputed exactly at the end.
    pub true_residual: f64,
}

/// Conjugate gradient with `r^T r` and `p^T A p` computed by qdot.
pub fn acg(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<CgResult> {
    let tol = cfg.tolerance()?;
    cg_with(a, b, x0, cfg, &Approx(tol, cfg.strategy))
}

/// The same iteration with plain binary64 dot products.
pub fn reference_cg(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<CgResult> {
    cfg.tolerance()?;
    cg_with(a, b, x0, cfg, &Exact)
}

fn cg_with(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
    dot: &dyn Dot,
) -> Result<CgResult> {
    let n = a.n;
    if b.len() != n {
        return Err(QdotError::LengthMismatch { x: n, y: b.len() });
    }
    let mut x = match x0 {
        Some(v) if v.len() != n => return Err(QdotError::LengthMismatch { x: n, y: v.len() }),
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let mut trace = SolveTrace::new(cfg.epsilon);
    let ax = a.matvec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut q = vec![0.0; n];

    let (mut c, counts) = dot.dot(&r, &r)?;
    check_norm(c, 0)?;
    let mut resid = c.sqrt();
    trace.rows.push(TraceRow::new(
        0,
        CallSite::RtR,
        &counts.unwrap_or_else(|| all_double(n)),
        resid,
    ));

    let mut k = 0;
    while resid > cfg.tau && k < cfg.max_iters {
        k += 1;
        a.matvec_into(&p, &mut q);
        let (d, counts) = dot.dot(&p, &q)?;
        trace.rows.push(TraceRow::new(
            k,
            CallSite::PtAp,
            &counts.unwrap_or_else(|| all_double(n)),
            resid,
        ));
        if !(d > 0.0) || !d.is_finite() {
            return Err(QdotError::Breakdown {
                iter: k,
                reason: format!("p^T A p = {d}"),
            });
        }
        let alpha = c / d;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let (c_next, counts) = dot.dot(&r, &r)?;
        check_norm(c_next, k)?;
        resid = c_next.sqrt();
        trace.rows.push(TraceRow::new(
            k,
            CallSite::RtR,
            &counts.unwrap_or_else(|| all_double(n)),
            resid,
        ));
        let beta = c_next / c;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        c = c_next;
    }
    trace.iterations = k;
    trace.converged = resid <= cfg.tau;

    let ax = a.matvec(&x);
    let true_residual = b
        .iter()
        .zip(&ax)
        .map(|(bi, ai)| (bi - ai) * (bi - ai))
        .sum::<f64>()
        .sqrt();
    Ok(CgResult {
        x,
        trace,
        true_residual,
    })
}

fn check_norm(c: f64, iter: usize) -> Result<()> {
    if c < 0.0 || !c.is_finite() {
        return Err(QdotError::Breakdown {
            iter,
            reason: format!("r^T r = {c}"),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub lambda: f64,
    pub x: Vec<f64>,
    pub trace: SolveTrace,
}

/// Power iteration with the normalization and eigenvalue dot products
/// computed by qdot.
///
/// `x0` defaults to [`default_power_start`] with seed 0. The estimate is the
/// Rayleigh quotient `x_k^T A x_k`, recovered as `x_k^T x_{k+1} * sqrt(c)`.
pub fn apm(a: &SparseMatrix, x0: Option<&[f64]>, cfg: &SolverConfig) -> Result<PowerResult> {
    let tol = cfg.tolerance()?;
    pm_with(a, x0, cfg, &Approx(tol, cfg.strategy))
}

pub fn reference_pm(
    a: &SparseMatrix,
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<PowerResult> {
    cfg.tolerance()?;
    pm_with(a, x0, cfg, &Exact)
}

fn pm_with(
    a: &SparseMatrix,
    x0: Option<&[f64]>,
    cfg: &SolverConfig,
    dot: &dyn Dot,
) -> Result<PowerResult> {
    let n = a.n;
    let mut x = match x0 {
        Some(v) if v.len() != n => return Err(QdotError::LengthMismatch { x: n, y: v.len() }),
        Some(v) => v.to_vec(),
        None => default_power_start(n, 0),
    };
    let mut trace = SolveTrace::new(cfg.epsilon);
    let mut lambda = f64::NAN;
    let mut y = vec![0.0; n];
    let mut k = 0;
    while k < cfg.max_iters {
        k += 1;
        a.matvec_into(&x, &mut y);
        let (c, counts) = dot.dot(&y, &y)?;
        if !(c > 0.0) || !c.is_finite() {
            return Err(QdotError::Breakdown {
                iter: k,
                reason: format!("iterate norm^2 = {c}"),
            });
        }
        let s = c.sqrt();
        y.iter_mut().for_each(|v| *v /= s);
        trace.rows.push(TraceRow::new(
            k,
            CallSite::XtX,
            &counts.unwrap_or_else(|| all_double(n)),
            lambda,
        ));
        let (xy, counts) = dot.dot(&x, &y)?;
        let next = xy * s;
        trace.rows.push(TraceRow::new(
            k,
            CallSite::XtAx,
            &counts.unwrap_or_else(|| all_double(n)),
            next,
        ));
        let done = (next - lambda).abs() <= cfg.tau;
        lambda = next;
        std::mem::swap(&mut x, &mut y);
        if done {
            trace.converged = true;
            break;
        }
    }
    trace.iterations = k;
    Ok(PowerResult { lambda, x, trace })
}
