use rank1sense::altmin::{alternate, decay_ratios, fast_matrix_sensing, FinalFit, SolverConfig};
use rank1sense::geometry::dist;
use rank1sense::numerics::{spectral_norm, svd, thin_qr};
use rank1sense::regression::{condition_number, solve_sensing_step, InnerSolver, RegressionProblem};
use rank1sense::sensing::{evaluate, split_ensemble, MeasurementSource};
use rank1sense::{make_ground_truth, rng, sample_ensemble, DenseMatrix, Error, GroundTruth64, SpectrumShape};

fn truth(d: usize, k: usize, kappa: f64, seed: u64) -> GroundTruth64 {
    make_ground_truth(d, k, kappa, SpectrumShape::Geometric, seed).unwrap()
}

#[test]
fn trace_shape_and_orthonormal_factors() {
    let g = truth(12, 2, 2.0, 1);
    let cfg = SolverConfig::new(12, 2, 600, 5, 2);
    let run = fast_matrix_sensing(&cfg, &g).unwrap();
    assert_eq!(run.trace.records.len(), 6);
    assert_eq!(run.trace.total_samples, 12 * 600);
    assert!(run.u.orthonormality_defect() < 1e-10);
    for r in &run.trace.records {
        for x in [r.dist_u, r.dist_v].into_iter().flatten() {
            assert!((0.0..=1.0).contains(&x));
        }
    }
    assert!(run.trace.records[0].dist_v.is_none());
    assert!(run.trace.records[1..].iter().all(|r| r.residual.is_some()));
}

#[test]
fn exact_start_recovers_v_in_one_step() {
    let g = truth(8, 2, 3.0, 4);
    let cfg = SolverConfig::new(8, 2, 64, 1, 5);
    let e = sample_ensemble::<f64>(8, 64 * cfg.num_blocks(), 6).unwrap();
    let b = g.measure(&e).unwrap();
    let blocks = split_ensemble(&e, &b, cfg.num_blocks()).unwrap();
    let run = alternate(&cfg, &blocks, Some(&g), Some(g.u_star.clone())).unwrap();
    assert!(run.trace.records[0].dist_u.unwrap() < 1e-12);
    assert!(run.trace.records[1].dist_v.unwrap() <= 1e-8);
}

#[test]
fn exact_step_returns_w_star_transpose_u() {
    let g = truth(6, 2, 2.0, 7);
    let e = sample_ensemble::<f64>(6, 40, 8).unwrap();
    let b = g.measure(&e).unwrap();
    let step = solve_sensing_step(&g.u_star, &e, &b, &InnerSolver::naive(), 0).unwrap();
    let expect = g.matrix().t_matmul(&g.u_star);
    assert!((&step.v_hat - &expect).max_abs() <= 1e-8);
}

#[test]
fn sketched_and_naive_runs_agree() {
    let g = truth(10, 2, 2.0, 9);
    let naive = SolverConfig::new(10, 2, 500, 6, 10);
    let sketched = SolverConfig { solver: InnerSolver::sketched(1e-6, 0.01), ..naive.clone() };
    let a = fast_matrix_sensing(&naive, &g).unwrap().trace.final_rel_error().unwrap();
    let b = fast_matrix_sensing(&sketched, &g).unwrap().trace.final_rel_error().unwrap();
    assert!((a - b).abs() <= 10.0 * 1e-6, "{a} vs {b}");
}

#[test]
fn literal_final_fit_pairs_mismatched_bases() {
    let g = truth(10, 2, 2.0, 11);
    let extra = SolverConfig::new(10, 2, 500, 6, 12);
    let literal = SolverConfig { final_fit: FinalFit::Literal, ..extra.clone() };
    let a = fast_matrix_sensing(&extra, &g).unwrap();
    let b = fast_matrix_sensing(&literal, &g).unwrap();
    assert_eq!(b.trace.total_samples, 13 * 500);
    // Same iterates; only the closing pairing differs. U_T U_{T-1}ᵀ is not a
    // projector, so the literal estimate keeps an O(1)-rotation error.
    assert_eq!(a.u, b.u);
    let (ea, eb) = (a.trace.final_rel_error().unwrap(), b.trace.final_rel_error().unwrap());
    assert!(ea < 1e-8 && eb > 10.0 * ea, "{ea} vs {eb}");
}

#[test]
fn reused_block_mode_runs() {
    let g = truth(8, 2, 2.0, 13);
    let cfg = SolverConfig { resample: false, ..SolverConfig::new(8, 2, 400, 6, 14) };
    assert_eq!(cfg.num_blocks(), 2);
    let run = fast_matrix_sensing(&cfg, &g).unwrap();
    assert!(run.trace.final_rel_error().unwrap() < 1e-6);
}

#[test]
fn runs_are_thread_count_independent() {
    let g = truth(10, 2, 2.0, 15);
    // More than one sampling chunk so parallel generation is exercised.
    let cfg = SolverConfig::new(10, 2, 700, 3, 16);
    let on = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| fast_matrix_sensing(&cfg, &g).unwrap())
    };
    let (one, four) = (on(1), on(4));
    assert_eq!(one.w, four.w);
    assert_eq!(one.trace.records.len(), four.trace.records.len());
    for (a, b) in one.trace.records.iter().zip(&four.trace.records) {
        assert_eq!((a.dist_u, a.dist_v, a.rel_error), (b.dist_u, b.dist_v, b.rel_error));
    }
}

#[test]
fn starved_run_is_flagged_or_collapses() {
    let g = truth(10, 3, 4.0, 17);
    let cfg = SolverConfig::new(10, 3, 30, 4, 18);
    match fast_matrix_sensing(&cfg, &g) {
        Ok(run) => {
            let err = run.trace.final_rel_error().unwrap();
            let flagged = decay_ratios(&run.trace).iter().any(|r| r.flagged);
            assert!(flagged || err > 1e-6, "starved run converged cleanly: {err}");
        }
        Err(e) => assert!(matches!(e, Error::RankCollapse { .. } | Error::IllConditioned { .. })),
    }
}

#[test]
fn single_precision_run_converges() {
    let g = make_ground_truth::<f32>(8, 2, 2.0, SpectrumShape::Geometric, 19).unwrap();
    let cfg = SolverConfig::new(8, 2, 400, 6, 20);
    let run = fast_matrix_sensing(&cfg, &g).unwrap();
    assert!(run.trace.final_rel_error().unwrap() < 1e-4);
}

#[test]
fn dense_matrix_is_a_measurement_source() {
    let g = truth(6, 2, 2.0, 21);
    let w = g.matrix();
    let e = sample_ensemble::<f64>(6, 30, 22).unwrap();
    assert_eq!(MeasurementSource::dim(&w), 6);
    let from_dense = w.measure(&e).unwrap();
    let from_factors = g.measure(&e).unwrap();
    for (a, b) in from_dense.iter().zip(&from_factors) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    assert!(MeasurementSource::ground_truth(&w).is_none());
    // Without ground truth the trace carries no distances.
    let cfg = SolverConfig::new(6, 2, 200, 6, 23);
    let run = fast_matrix_sensing(&cfg, &w).unwrap();
    assert!(run.trace.records.iter().all(|r| r.dist_u.is_none() && r.rel_error.is_none()));
    let rel = spectral_norm(&(&run.w - &w)) / spectral_norm(&w);
    assert!(rel < 1e-6, "{rel}");
}

#[test]
fn objective_is_locally_optimal() {
    let g = truth(6, 2, 2.0, 24);
    let e = sample_ensemble::<f64>(6, 60, 25).unwrap();
    let b = g.measure(&e).unwrap();
    let mut r = rng::stream(26, 0, 0);
    let u = thin_qr(&DenseMatrix::from_fn(6, 2, |_, _| rng::gaussian::<f64, _>(&mut r))).unwrap().q;
    let step = solve_sensing_step(&u, &e, &b, &InnerSolver::naive(), 0).unwrap();
    let objective = |v: &DenseMatrix<f64>| -> f64 {
        let fit = evaluate(&u.matmul_t(v), &e).unwrap();
        fit.iter().zip(&b).map(|(f, y)| (f - y).powi(2)).sum()
    };
    let best = objective(&step.v_hat);
    for _ in 0..100 {
        let delta = DenseMatrix::from_fn(6, 2, |_, _| 1e-3 * rng::gaussian::<f64, _>(&mut r));
        assert!(objective(&(&step.v_hat + &delta)) >= best);
    }
}

#[test]
fn design_condition_number_vs_factor_product() {
    // The product bound is logged, not asserted as an equality.
    let e = sample_ensemble::<f64>(6, 200, 27).unwrap();
    let g = truth(6, 2, 2.0, 28);
    let b = g.measure(&e).unwrap();
    let p = RegressionProblem::from_sensing(&g.u_star, &e, &b).unwrap();
    let kappa_m = condition_number(&p.design).unwrap();
    let kappa_xu = condition_number(&e.x.matmul(&g.u_star)).unwrap();
    let kappa_y = condition_number(&e.y).unwrap();
    println!("kappa(M) = {kappa_m}, kappa(XU)·kappa(Y) = {}", kappa_xu * kappa_y);
    assert!(kappa_m >= 1.0);
    let s = svd(&p.design).singular_values;
    assert!((s[0] / s[s.len() - 1] - kappa_m).abs() < 1e-9 * kappa_m);
    let _ = dist(&g.u_star, &g.u_star).unwrap();
}
