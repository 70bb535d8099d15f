use qdot_core::apps::{
    acg, apm, default_power_start, gen_graph_laplacian, gen_stencil, reference_cg, reference_pm,
    CallSite, SolverConfig,
};
use qdot_core::harness::{run_grid, run_sweep, Family, Grid, Pairing};
use qdot_core::{QdotError, SplitMode, Strategy};

fn config(epsilon: f64, tau: f64) -> SolverConfig {
    SolverConfig {
        tau,
        max_iters: 2_000,
        epsilon,
        split: SplitMode::PerBin,
        strategy: Strategy::Exact,
    }
}

#[test]
fn acg_tracks_reference_on_stencil() {
    let (a, b) = gen_stencil(20, 20, 3).unwrap();
    assert!(a.is_structurally_symmetric());
    let reference = reference_cg(&a, &b, None, &config(1.0, 1e-10)).unwrap();
    assert!(reference.trace.converged);
    // the right-hand side is the row sums, so the solution is all ones
    assert!(reference.x.iter().all(|v| (v - 1.0).abs() < 1e-8));

    for eps in [2f64.powi(-58), 1e-12, 1e-6] {
        let r = acg(&a, &b, None, &config(eps, 1e-10)).unwrap();
        assert!(r.trace.converged, "eps {eps}");
        assert!(r.true_residual < 1e-8, "eps {eps}: {}", r.true_residual);
        assert!(r.trace.iterations <= reference.trace.iterations + 2);
        for row in &r.trace.rows {
            let total = row.pct_perforate + row.pct_half + row.pct_single + row.pct_double;
            assert!((total - 100.0).abs() < 1e-9);
        }
        assert_eq!(r.trace.rows_at(CallSite::PtAp).count(), r.trace.iterations);
    }
}

#[test]
fn loose_tolerance_lowers_precision_in_cg() {
    let (a, b) = gen_stencil(30, 30, 1).unwrap();
    let tight = acg(&a, &b, None, &config(1e-14, 1e-8)).unwrap();
    let loose = acg(&a, &b, None, &config(1e-2, 1e-8)).unwrap();
    let double = |rows: &[qdot_core::apps::TraceRow]| {
        rows.iter().map(|r| r.pct_double).sum::<f64>() / rows.len() as f64
    };
    assert!(double(&loose.trace.rows) < double(&tight.trace.rows));
}

#[test]
fn apm_matches_reference_power_method() {
    let g = gen_graph_laplacian(400, 0.03, 9).unwrap();
    let x0 = default_power_start(400, 9);
    let cfg = config(1e-9, 1e-8);
    let pm = reference_pm(&g, Some(&x0), &cfg).unwrap();
    let ap = apm(&g, Some(&x0), &cfg).unwrap();
    assert!((pm.lambda - ap.lambda).abs() < 1e-6);
    assert!(ap.trace.rows_at(CallSite::XtAx).count() >= 2);
    let max_degree = (0..400).map(|i| g.get(i, i)).fold(0.0, f64::max);
    assert!(pm.lambda <= 2.0 * max_degree && pm.lambda >= max_degree);
}

#[test]
fn bad_solver_parameters_are_rejected() {
    let (a, b) = gen_stencil(3, 3, 3).unwrap();
    let mut cfg = config(1e-8, -1.0);
    assert!(matches!(
        acg(&a, &b, None, &cfg),
        Err(QdotError::InvalidParameter(_))
    ));
    cfg.tau = 1e-8;
    cfg.epsilon = 0.0;
    assert!(matches!(
        acg(&a, &b, None, &cfg),
        Err(QdotError::InvalidParameter(_))
    ));
    assert!(gen_graph_laplacian(10, 2.0, 0).is_err());
}

fn grid() -> Grid {
    Grid {
        families: vec![
            (Family::UniformExp, vec![20.0, 60.0]),
            (Family::NormalExp, vec![8.0]),
        ],
        sizes: vec![257],
        pairings: vec![Pairing::Same, Pairing::Independent],
        epsilons: vec![1e-10, 1e-3],
        splits: vec![SplitMode::None, SplitMode::PerBin],
        strategy: Strategy::Exact,
        trials: 4,
        seed: 77,
    }
}

#[test]
fn grid_results_do_not_depend_on_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_grid(&grid()).unwrap())
    };
    let strip = |v: Vec<qdot_core::harness::TrialOutcome>| -> Vec<(String, f64, f64, usize)> {
        v.into_iter()
            .map(|o| {
                (
                    o.record.family,
                    o.record.value,
                    o.record.reference,
                    o.record.trial,
                )
            })
            .collect()
    };
    let one = strip(run(1));
    assert_eq!(one.len(), 3 * 2 * 2 * 2 * 4);
    assert_eq!(one, strip(run(4)));
}

#[test]
fn sweep_is_sound_and_summarized_per_cell() {
    let (outcomes, summary) = run_sweep(&grid()).unwrap();
    assert!(outcomes.iter().all(|o| o.sound()));
    assert_eq!(summary.len(), grid().cells().len());
    for s in &summary {
        assert_eq!(s.trials, 4);
        assert!(s.relerr_min <= s.relerr_mean && s.relerr_mean <= s.relerr_max);
        assert!(
            (s.effectiveness_mean - (s.epsilon - s.relerr_mean)).abs()
                <= 1e-12 * s.epsilon.max(1e-300)
        );
    }
}
