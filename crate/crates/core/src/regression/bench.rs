//! Naive versus sketched timing on identical least-squares problems.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{solve_naive, InnerSolver, Method, RegressionProblem};
use crate::altmin::fmt_f64;
use crate::numerics::thin_qr;
use crate::sensing::{make_ground_truth, sample_ensemble, SpectrumShape};
use crate::{rng, DenseMatrix, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub method: Method,
    pub repetition: usize,
    pub build_millis: f64,
    pub solve_millis: f64,
    pub residual: f64,
    /// Residual over the naive residual on the same problem.
    pub residual_ratio: f64,
}

/// A sensing regression at a random `U` against a planted rank-k target,
/// so the minimum residual is nonzero.
pub fn bench_problem(d: usize, k: usize, m: usize, seed: u64) -> Result<(RegressionProblem<f64>, f64)> {
    let kappa = if k == 1 { 1.0 } else { 2.0 };
    let g = make_ground_truth::<f64>(d, k, kappa, SpectrumShape::Geometric, seed)?;
    let e = sample_ensemble::<f64>(d, m, rng::derive_seed(seed, 1))?;
    let b = g.measure(&e)?;
    let mut r = rng::stream(seed, rng::domain::PROBE, 0);
    let u = thin_qr(&DenseMatrix::from_fn(d, k, |_, _| rng::gaussian::<f64, _>(&mut r)))?.q;
    let started = Instant::now();
    let p = RegressionProblem::from_sensing(&u, &e, &b)?;
    let build_millis = started.elapsed().as_secs_f64() * 1e3;
    Ok((p, build_millis))
}

/// One naive and one sketched row per repetition, naive first.
pub fn bench_regression(
    d: usize,
    k: usize,
    m: usize,
    repetitions: usize,
    sketched: &InnerSolver,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(2 * repetitions);
    for rep in 0..repetitions {
        let rep_seed = rng::derive_seed(seed, rep as u64);
        let (p, build_millis) = bench_problem(d, k, m, rep_seed)?;

        let started = Instant::now();
        let v_naive = solve_naive(&p)?;
        let naive_millis = started.elapsed().as_secs_f64() * 1e3;
        let naive_residual = p.residual_norm(&v_naive);

        let solver = InnerSolver { method: Method::Sketched, ..*sketched };
        let started = Instant::now();
        let v_sketch = solver.solve(&p, rep_seed)?;
        let sketch_millis = started.elapsed().as_secs_f64() * 1e3;
        let sketch_residual = p.residual_norm(&v_sketch);

        for (method, solve_millis, residual) in
            [(Method::Naive, naive_millis, naive_residual), (Method::Sketched, sketch_millis, sketch_residual)]
        {
            rows.push(BenchRow {
                d,
                k,
                m,
                method,
                repetition: rep,
                build_millis,
                solve_millis,
                residual,
                residual_ratio: residual / naive_residual,
            });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv(rows: &[BenchRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "d,k,m,method,repetition,build_millis,solve_millis,residual,residual_ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.d,
            r.k,
            r.m,
            r.method,
            r.repetition,
            fmt_f64(r.build_millis),
            fmt_f64(r.solve_millis),
            fmt_f64(r.residual),
            fmt_f64(r.residual_ratio)
        )?;
    }
    Ok(())
}
