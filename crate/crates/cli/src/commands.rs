//! Subcommand implementations.

use std::io::Write;

use serde::Serialize;

use qdot_core::apps::{
    acg, apm, default_power_start, gen_graph_laplacian, gen_stencil, reference_cg, reference_pm,
    SolveTrace, SolverConfig, TraceRow,
};
use qdot_core::harness::{
    generate, run_grid, summarize, DistSpec, Family, Grid, Pairing, TrialOutcome,
};
use qdot_core::kernel::{qdot_verified, relative_error};
use qdot_core::{QdotError, SplitMode, ToleranceConfig};

use crate::config::RunConfig;
use crate::io::{read_vector, write_csv};
use crate::{CliError, CommandKind};

pub fn dispatch(
    kind: CommandKind,
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    match kind {
        CommandKind::Dot => cmd_dot(cfg, stdout),
        CommandKind::Verify => cmd_verify(cfg, stdout, stderr),
        CommandKind::Bench => cmd_bench(cfg, stdout, stderr),
        CommandKind::Cg => cmd_cg(cfg, stdout, stderr),
        CommandKind::Power => cmd_power(cfg, stdout, stderr),
    }
}

/// Runs `f` on a pool sized by the `threads` setting.
fn with_pool<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::usage(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn splits_or(cfg: &RunConfig, default: &[SplitMode]) -> Vec<SplitMode> {
    cfg.split.map_or_else(|| default.to_vec(), |s| vec![s])
}

fn first_t(cfg: &RunConfig, family: Family) -> f64 {
    cfg.t
        .as_ref()
        .and_then(|t| t.first().copied())
        .unwrap_or_else(|| family.default_t_grid()[0])
}

#[derive(Debug, Serialize)]
struct DotRow {
    epsilon: f64,
    split: String,
    strategy: String,
    n: usize,
    value: f64,
    reference: f64,
    relerr: f64,
    rel_bound: f64,
    abs_bound: f64,
    hypothesis: String,
    bins: usize,
    early_terminated: bool,
    pct_perforate: f64,
    pct_half: f64,
    pct_single: f64,
    pct_double: f64,
    t_select_ns: u64,
    t_compute_ns: u64,
    t_reference_ns: u64,
}

pub fn cmd_dot(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let (x, y) = match (&cfg.x, &cfg.y) {
        (Some(px), Some(py)) => (read_vector(px)?, read_vector(py)?),
        (Some(px), None) => {
            let x = read_vector(px)?;
            (x.clone(), x)
        }
        (None, Some(_)) => return Err(CliError::usage("--y needs --x")),
        (None, None) => {
            let family = *cfg
                .family
                .first()
                .ok_or_else(|| CliError::usage("no family given"))?;
            let n = *cfg
                .n
                .first()
                .ok_or_else(|| CliError::usage("no length given"))?;
            let spec = DistSpec {
                family,
                t: first_t(cfg, family),
                n,
                seed: cfg.seed,
            };
            let (x, y) = generate(&spec)?;
            if cfg.pairing == [Pairing::Same] {
                (x.clone(), x)
            } else {
                (x, y)
            }
        }
    };
    let split = cfg.split.unwrap_or(SplitMode::None);
    let mut rows = Vec::new();
    for epsilon in cfg.epsilons() {
        let tol = ToleranceConfig::new(epsilon, split)?;
        let (r, reference) = qdot_verified(&x, &y, tol, cfg.strategy)?;
        let [pct_perforate, pct_half, pct_single, pct_double] = r.counts.percentages();
        let keep = |ns: u64| if cfg.timings { ns } else { 0 };
        rows.push(DotRow {
            epsilon,
            split: split.to_string(),
            strategy: cfg.strategy.to_string(),
            n: x.len(),
            value: r.value,
            reference: reference.value,
            relerr: relative_error(reference.value, r.value),
            rel_bound: r.rel_bound,
            abs_bound: r.abs_bound,
            hypothesis: format!("{:?}", r.hypothesis).to_lowercase(),
            bins: r.n_bins,
            early_terminated: r.early_terminated,
            pct_perforate,
            pct_half,
            pct_single,
            pct_double,
            t_select_ns: keep(r.timings.select_ns),
            t_compute_ns: keep(r.timings.compute_ns),
            t_reference_ns: keep(r.timings.reference_ns),
        });
    }
    write_csv(cfg.output.as_deref(), stdout, &rows)
}

fn grid_from(cfg: &RunConfig, default_splits: &[SplitMode]) -> Result<Grid, CliError> {
    if cfg.family.is_empty() || cfg.n.is_empty() || cfg.pairing.is_empty() {
        return Err(CliError::usage("family, n and pairing must not be empty"));
    }
    let families = cfg
        .family
        .iter()
        .map(|&f| (f, cfg.t.clone().unwrap_or_else(|| f.default_t_grid())))
        .collect();
    Ok(Grid {
        families,
        sizes: cfg.n.clone(),
        pairings: cfg.pairing.clone(),
        epsilons: cfg.epsilons(),
        splits: splits_or(cfg, default_splits),
        strategy: cfg.strategy,
        trials: cfg.trials,
        seed: cfg.seed,
    })
}

fn scrub_timings(outcomes: &mut [TrialOutcome], keep: bool) {
    if !keep {
        for o in outcomes {
            o.record.t_select_ns = 0;
            o.record.t_compute_ns = 0;
            o.record.t_reference_ns = 0;
        }
    }
}

pub fn cmd_verify(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let grid = grid_from(cfg, &[SplitMode::None, SplitMode::PerBin])?;
    let mut outcomes = with_pool(cfg, || run_grid(&grid))??;
    scrub_timings(&mut outcomes, cfg.timings);
    let records: Vec<_> = outcomes.iter().map(|o| &o.record).collect();
    write_csv(cfg.output.as_deref(), stdout, &records)?;

    let abs = outcomes.iter().filter(|o| !o.abs_ok).count();
    let rel = outcomes.iter().filter(|o| !o.rel_ok).count();
    let skipped = outcomes.iter().filter(|o| !o.rel_applicable).count();
    let _ = writeln!(
        stderr,
        "trials {}: absolute-bound violations {abs}, relative-bound violations {rel} \
         ({skipped} trials checked against the exact-exponent bound)",
        outcomes.len()
    );
    let bad = outcomes.iter().filter(|o| !o.sound()).count();
    if bad > 0 {
        return Err(CliError::Violations(bad));
    }
    Ok(())
}

pub fn cmd_bench(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let grid = grid_from(cfg, &[SplitMode::PerBin])?;
    let mut outcomes = with_pool(cfg, || run_grid(&grid))??;
    scrub_timings(&mut outcomes, cfg.timings);
    let summaries = summarize(&outcomes, grid.trials);
    let records: Vec<_> = outcomes.iter().map(|o| &o.record).collect();
    write_csv(cfg.output.as_deref(), stdout, &records)?;
    if let Some(path) = &cfg.summary {
        write_csv(Some(path), stdout, &summaries)?;
    }
    if !cfg.timings {
        let _ = writeln!(
            stderr,
            "timings not recorded; pass --timings for speedup and efficiency"
        );
    } else {
        for s in &summaries {
            let _ = writeln!(
                stderr,
                "{} t={} n={} {} eps={:e}: speedup {:.3}, efficiency {:.3}",
                s.family, s.t, s.n, s.pairing, s.epsilon, s.speedup_mean, s.efficiency_mean
            );
        }
    }
    Ok(())
}

fn solver_config(cfg: &RunConfig, epsilon: f64, tau: f64, max_iters: usize) -> SolverConfig {
    SolverConfig {
        tau: cfg.tau.unwrap_or(tau),
        max_iters: cfg.max_iters.unwrap_or(max_iters),
        epsilon,
        split: cfg.split.unwrap_or(SplitMode::PerBin),
        strategy: cfg.strategy,
    }
}

fn status(trace: &SolveTrace) -> &'static str {
    if trace.converged {
        "converged"
    } else {
        "max_iters"
    }
}

fn mean_percentages(rows: &[TraceRow]) -> [f64; 4] {
    if rows.is_empty() {
        return [0.0; 4];
    }
    let k = rows.len() as f64;
    let sum = |f: fn(&TraceRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
    [
        sum(|r| r.pct_perforate),
        sum(|r| r.pct_half),
        sum(|r| r.pct_single),
        sum(|r| r.pct_double),
    ]
}

#[derive(Debug, Serialize)]
struct CgScanRow {
    epsilon: f64,
    status: String,
    iterations: usize,
    ref_iterations: usize,
    resid: f64,
    true_residual: f64,
    pct_perforate: f64,
    pct_half: f64,
    pct_single: f64,
    pct_double: f64,
}

pub fn cmd_cg(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let (a, b) = gen_stencil(cfg.nx, cfg.ny, cfg.nz)?;
    let base = solver_config(cfg, cfg.epsilon, 1e-8, 10 * a.n.max(100));
    let reference = with_pool(cfg, || reference_cg(&a, &b, None, &base))??;
    let _ = writeln!(
        stderr,
        "reference CG: {} iterations ({}), residual {:e}",
        reference.trace.iterations,
        status(&reference.trace),
        reference.true_residual
    );

    if cfg.epsilon_scan.is_none() {
        let r = with_pool(cfg, || acg(&a, &b, None, &base))??;
        let _ = writeln!(
            stderr,
            "ACG eps={:e}: {} iterations ({}), residual {:e}",
            base.epsilon,
            r.trace.iterations,
            status(&r.trace),
            r.true_residual
        );
        return write_csv(cfg.output.as_deref(), stdout, &r.trace.rows);
    }

    let mut rows = Vec::new();
    for epsilon in cfg.epsilons() {
        let sc = SolverConfig { epsilon, ..base };
        let row = match with_pool(cfg, || acg(&a, &b, None, &sc))? {
            Ok(r) => {
                let [pct_perforate, pct_half, pct_single, pct_double] =
                    mean_percentages(&r.trace.rows);
                CgScanRow {
                    epsilon,
                    status: status(&r.trace).into(),
                    iterations: r.trace.iterations,
                    ref_iterations: reference.trace.iterations,
                    resid: r.trace.rows.last().map_or(f64::NAN, |t| t.resid_or_lambda),
                    true_residual: r.true_residual,
                    pct_perforate,
                    pct_half,
                    pct_single,
                    pct_double,
                }
            }
            Err(QdotError::Breakdown { iter, .. }) => CgScanRow {
                epsilon,
                status: "breakdown".into(),
                iterations: iter,
                ref_iterations: reference.trace.iterations,
                resid: f64::NAN,
                true_residual: f64::NAN,
                pct_perforate: f64::NAN,
                pct_half: f64::NAN,
                pct_single: f64::NAN,
                pct_double: f64::NAN,
            },
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    write_csv(cfg.output.as_deref(), stdout, &rows)
}

#[derive(Debug, Serialize)]
struct PowerScanRow {
    epsilon: f64,
    status: String,
    iterations: usize,
    ref_iterations: usize,
    lambda: f64,
    ref_lambda: f64,
    abs_diff: f64,
    pct_perforate: f64,
    pct_half: f64,
    pct_single: f64,
    pct_double: f64,
}

pub fn cmd_power(
    cfg: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let n = *cfg
        .n
        .first()
        .ok_or_else(|| CliError::usage("no graph size given"))?;
    let a = gen_graph_laplacian(n, cfg.edge_prob, cfg.seed)?;
    let x0 = default_power_start(n, cfg.seed);
    let base = solver_config(cfg, cfg.epsilon, 1e-6, 300);
    let reference = with_pool(cfg, || reference_pm(&a, Some(&x0), &base))??;
    let _ = writeln!(
        stderr,
        "reference PM: lambda {} after {} iterations ({})",
        reference.lambda,
        reference.trace.iterations,
        status(&reference.trace)
    );

    if cfg.epsilon_scan.is_none() {
        let r = with_pool(cfg, || apm(&a, Some(&x0), &base))??;
        let _ = writeln!(
            stderr,
            "APM eps={:e}: lambda {} after {} iterations ({}), |diff| {:e}",
            base.epsilon,
            r.lambda,
            r.trace.iterations,
            status(&r.trace),
            (r.lambda - reference.lambda).abs()
        );
        return write_csv(cfg.output.as_deref(), stdout, &r.trace.rows);
    }

    let mut rows = Vec::new();
    for epsilon in cfg.epsilons() {
        let sc = SolverConfig { epsilon, ..base };
        let row = match with_pool(cfg, || apm(&a, Some(&x0), &sc))? {
            Ok(r) => {
                let [pct_perforate, pct_half, pct_single, pct_double] =
                    mean_percentages(&r.trace.rows);
                PowerScanRow {
                    epsilon,
                    status: status(&r.trace).into(),
                    iterations: r.trace.iterations,
                    ref_iterations: reference.trace.iterations,
                    lambda: r.lambda,
                    ref_lambda: reference.lambda,
                    abs_diff: (r.lambda - reference.lambda).abs(),
                    pct_perforate,
                    pct_half,
                    pct_single,
                    pct_double,
                }
            }
            Err(QdotError::Breakdown { iter, .. }) => PowerScanRow {
                epsilon,
                status: "breakdown".into(),
                iterations: iter,
                ref_iterations: reference.trace.iterations,
                lambda: f64::NAN,
                ref_lambda: reference.lambda,
                abs_diff: f64::NAN,
                pct_perforate: f64::NAN,
                pct_half: f64::NAN,
                pct_single: f64::NAN,
                pct_double: f64::NAN,
            },
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    write_csv(cfg.output.as_deref(), stdout, &rows)
}
