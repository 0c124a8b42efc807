//! One function per subcommand. Each receives a validated spec and an already
//! opened sink, computes, and writes once at the end.

use std::io::Write;
use std::path::PathBuf;

use rank1sense::altmin::{decay_ratios, HalfStep, IterationRecord};
use rank1sense::diagnostics::{
    basis_at_distance, check_all, median, shrinking_step_report, OperatorReport, ShrinkingReport,
};
use rank1sense::numerics::spectral_norm;
use rank1sense::regression::bench::{bench_regression, BenchRow};
use rank1sense::{
    fast_matrix_sensing, make_ground_truth, rng, sample_ensemble, ConvergenceTrace, Error, GroundTruth64, InnerSolver,
    Method, Result, Run, SolverConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Format, Resolved};
use crate::output::{self, f, opt, CsvRow};

fn ground_truth(cfg: &Resolved, seed: u64) -> Result<GroundTruth64> {
    make_ground_truth(cfg.d, cfg.k, cfg.kappa, cfg.spectrum, seed)
}

fn solver(cfg: &Resolved) -> InnerSolver {
    match cfg.method {
        Method::Naive => InnerSolver::naive(),
        Method::Sketched => InnerSolver::sketched(cfg.sketch_eps, cfg.sketch_delta),
    }
}

fn solver_config(cfg: &Resolved, m: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        eps0: cfg.eps0,
        solver: solver(cfg),
        final_fit: cfg.final_fit,
        ..SolverConfig::new(cfg.d, cfg.k, m, cfg.iters, seed)
    }
}

/// Every `(m, trial)` pair in row order.
fn grid(cfg: &Resolved) -> Vec<(usize, usize)> {
    cfg.m.iter().flat_map(|&m| (0..cfg.trials).map(move |t| (m, t))).collect()
}

// ---------------------------------------------------------------- run

#[derive(Serialize)]
struct TraceRow {
    seed: u64,
    m: usize,
    t: usize,
    dist_u: Option<f64>,
    dist_v: Option<f64>,
    rel_error: Option<f64>,
    abs_error: Option<f64>,
    residual: Option<f64>,
    millis: Option<f64>,
}

impl TraceRow {
    fn new(seed: u64, m: usize, r: &IterationRecord, timings: bool) -> Self {
        TraceRow {
            seed,
            m,
            t: r.t,
            dist_u: r.dist_u,
            dist_v: r.dist_v,
            rel_error: r.rel_error,
            abs_error: r.abs_error,
            residual: r.residual,
            millis: timings.then_some(r.millis),
        }
    }
}

impl CsvRow for TraceRow {
    const HEADER: &'static str = "seed,m,t,dist_U,dist_V,rel_error,abs_error,residual,millis";

    fn cells(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.m.to_string(),
            self.t.to_string(),
            opt(self.dist_u),
            opt(self.dist_v),
            opt(self.rel_error),
            opt(self.abs_error),
            opt(self.residual),
            opt(self.millis),
        ]
    }
}

#[derive(Serialize)]
struct PhaseMillis {
    sampling: f64,
    init: f64,
    iterate: f64,
    final_fit: f64,
    total: f64,
}

impl PhaseMillis {
    fn of(trace: &ConvergenceTrace) -> Self {
        PhaseMillis {
            sampling: trace.sampling_millis,
            init: trace.init_millis,
            iterate: trace.iterate_millis,
            final_fit: trace.final_fit_millis,
            total: trace.total_millis(),
        }
    }
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    m: usize,
    final_rel_error: Option<f64>,
    final_abs_error: Option<f64>,
    total_samples: usize,
    /// Least-squares residual of the last solve.
    solver_residual: Option<f64>,
    phase_millis: Option<PhaseMillis>,
    /// Sketched runs only: `‖W_sketched − W_naive‖ / ‖W*‖` on the same samples.
    naive_gap: Option<f64>,
    /// Sketched runs only: `naive_gap ≤ 10 · sketch_eps`.
    naive_equivalent: Option<bool>,
}

#[derive(Serialize)]
struct RunEntry {
    summary: RunSummary,
    trace: Vec<TraceRow>,
}

#[derive(Serialize)]
struct RunDocument<'a> {
    config: &'a Resolved,
    runs: &'a [RunEntry],
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    config: &'a Resolved,
    runs: Vec<&'a RunSummary>,
}

fn one_run(cfg: &Resolved, m: usize, seed: u64) -> Result<RunEntry> {
    let g = ground_truth(cfg, seed)?;
    let sc = solver_config(cfg, m, seed);
    let run: Run = fast_matrix_sensing(&sc, &g)?;
    let (naive_gap, naive_equivalent) = match cfg.method {
        Method::Naive => (None, None),
        Method::Sketched => {
            let naive_cfg = SolverConfig { solver: InnerSolver::naive(), ..sc.clone() };
            let naive: Run = fast_matrix_sensing(&naive_cfg, &g)?;
            let gap = spectral_norm(&(&run.w - &naive.w)) / spectral_norm(&g.matrix());
            (Some(gap), Some(gap <= 10.0 * cfg.sketch_eps))
        }
    };
    let last = run.trace.records.last();
    let summary = RunSummary {
        seed,
        m,
        final_rel_error: last.and_then(|r| r.rel_error),
        final_abs_error: last.and_then(|r| r.abs_error),
        total_samples: run.trace.total_samples,
        solver_residual: last.and_then(|r| r.residual),
        phase_millis: cfg.timings.then(|| PhaseMillis::of(&run.trace)),
        naive_gap,
        naive_equivalent,
    };
    let trace = run.trace.records.iter().map(|r| TraceRow::new(seed, m, r, cfg.timings)).collect();
    Ok(RunEntry { summary, trace })
}

/// The trace goes to `out`; in CSV mode the JSON summary goes to `summary`.
pub fn run(cfg: &Resolved, mut out: Box<dyn Write>, summary: Option<Box<dyn Write>>) -> Result<()> {
    let mut entries = Vec::new();
    for seed in cfg.seed..cfg.seed + cfg.trials as u64 {
        for &m in &cfg.m {
            entries.push(one_run(cfg, m, seed)?);
        }
    }
    match cfg.format {
        Format::Csv => {
            let rows: Vec<&TraceRow> = entries.iter().flat_map(|e| &e.trace).collect();
            writeln!(out, "{}", output::echo_line(cfg))?;
            writeln!(out, "{}", TraceRow::HEADER)?;
            for r in rows {
                writeln!(out, "{}", r.cells().join(","))?;
            }
            out.flush()?;
            let mut s = summary.expect("csv runs carry a summary sink");
            let doc = SummaryDocument { config: cfg, runs: entries.iter().map(|e| &e.summary).collect() };
            output::write_json_value(&mut *s, &doc)?;
            s.flush()?;
        }
        Format::Json => {
            output::write_json_value(&mut *out, &RunDocument { config: cfg, runs: &entries })?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Where `run` puts its CSV-mode summary: next to the trace, or stderr.
pub fn summary_path(cfg: &Resolved) -> Option<PathBuf> {
    cfg.out.as_ref().map(|p| {
        let mut s = p.clone().into_os_string();
        s.push(".summary.json");
        PathBuf::from(s)
    })
}

// ---------------------------------------------------------------- sweep-m

#[derive(Serialize)]
struct SweepRow {
    m: usize,
    trials: usize,
    median_rel_error: f64,
    /// Median over trials and iterations of `dist(U_t, U*) / dist(U_{t−1}, U*)`.
    median_decay_ratio: f64,
    success_fraction: f64,
    /// Trials aborted by a numerical failure; they count as unsuccessful.
    failures: usize,
}

impl CsvRow for SweepRow {
    const HEADER: &'static str = "m,trials,median_rel_error,median_decay_ratio,success_fraction,failures";

    fn cells(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            self.trials.to_string(),
            f(self.median_rel_error),
            f(self.median_decay_ratio),
            f(self.success_fraction),
            self.failures.to_string(),
        ]
    }
}

/// Final error and per-iteration ratios of one trial, `None` when it failed
/// numerically (too few samples can make a factor collapse).
fn sweep_trial(cfg: &Resolved, m: usize, trial: usize) -> Result<Option<(f64, Vec<f64>)>> {
    let seed = rng::derive_seed(cfg.seed, trial as u64);
    let g = ground_truth(cfg, seed)?;
    let run: Run = match fast_matrix_sensing(&solver_config(cfg, m, seed), &g) {
        Ok(run) => run,
        Err(
            Error::RankCollapse { .. }
            | Error::RankDeficient { .. }
            | Error::IllConditioned { .. }
            | Error::SketchRankDeficient { .. }
            | Error::NoConvergence { .. },
        ) => return Ok(None),
        Err(e) => return Err(e),
    };
    let halves = decay_ratios(&run.trace);
    let ratios = halves
        .chunks(2)
        .filter_map(|pair| match pair {
            [v, u] if v.half == HalfStep::V && u.half == HalfStep::U => Some(v.ratio * u.ratio),
            _ => None,
        })
        .filter(|r| r.is_finite())
        .collect();
    Ok(Some((run.trace.final_rel_error().unwrap_or(f64::INFINITY), ratios)))
}

pub fn sweep_m(cfg: &Resolved, out: Box<dyn Write>) -> Result<()> {
    let cells = grid(cfg);
    let results: Vec<Option<(f64, Vec<f64>)>> =
        cells.par_iter().map(|&(m, t)| sweep_trial(cfg, m, t)).collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = cfg
        .m
        .iter()
        .zip(results.chunks(cfg.trials))
        .map(|(&m, chunk)| {
            let errors: Vec<f64> = chunk.iter().map(|r| r.as_ref().map_or(f64::INFINITY, |(e, _)| *e)).collect();
            let ratios: Vec<f64> = chunk.iter().flatten().flat_map(|(_, r)| r.iter().copied()).collect();
            let successes = errors.iter().filter(|&&e| e <= cfg.eps0).count();
            SweepRow {
                m,
                trials: cfg.trials,
                median_rel_error: median(&errors),
                median_decay_ratio: median(&ratios),
                success_fraction: successes as f64 / cfg.trials as f64,
                failures: chunk.iter().filter(|r| r.is_none()).count(),
            }
        })
        .collect();
    Ok(output::write_table(out, cfg, &rows)?)
}

// ---------------------------------------------------------------- check-operators

#[derive(Serialize)]
struct OperatorRow {
    m: usize,
    trial: usize,
    seed: u64,
    #[serde(flatten)]
    report: OperatorReport,
}

impl CsvRow for OperatorRow {
    const HEADER: &'static str = "m,trial,seed,eps,init_error,bx_error,by_error,gx_norm,gy_norm,z_max_norm,\
                                  pass_init,pass_bx,pass_by,pass_gx,pass_gy,pass_all";

    fn cells(&self) -> Vec<String> {
        let r = &self.report;
        let p = &r.passed;
        vec![
            self.m.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            f(r.epsilon_target),
            f(r.init_error),
            f(r.b_x_error),
            f(r.b_y_error),
            f(r.g_x_norm),
            f(r.g_y_norm),
            f(r.z_max_norm),
            p.init.to_string(),
            p.b_x.to_string(),
            p.b_y.to_string(),
            p.g_x.to_string(),
            p.g_y.to_string(),
            p.all().to_string(),
        ]
    }
}

pub fn check_operators(cfg: &Resolved, out: Box<dyn Write>) -> Result<()> {
    let rows: Vec<OperatorRow> = grid(cfg)
        .par_iter()
        .map(|&(m, trial)| {
            let seed = rng::derive_seed(cfg.seed, trial as u64);
            let g = ground_truth(cfg, seed)?;
            let e_init = sample_ensemble::<f64>(cfg.d, m, rng::derive_seed(seed, 1))?;
            let e_probe = sample_ensemble::<f64>(cfg.d, m, rng::derive_seed(seed, 2))?;
            let report = check_all(&g, &e_init, &e_probe, cfg.eps, cfg.probes, seed)?;
            Ok(OperatorRow { m, trial, seed, report })
        })
        .collect::<Result<_>>()?;
    Ok(output::write_table(out, cfg, &rows)?)
}

// ---------------------------------------------------------------- proof-diagnostics

#[derive(Serialize)]
struct ProofRow {
    trial: usize,
    seed: u64,
    #[serde(flatten)]
    report: ShrinkingReport,
    bounds_hold: bool,
}

impl CsvRow for ProofRow {
    const HEADER: &'static str = "m,trial,seed,eps,dist,bd_minus_c,bd_minus_c_bound,f_norm,f_bound,f_bound_refined,\
                                  sigma_min_b,f_identity_residual,sigma_min_r,sigma_min_r_bound,r_inv_norm,\
                                  r_inv_bound,rewrite_residual,complement_leak,bounds_hold";

    fn cells(&self) -> Vec<String> {
        let r = &self.report;
        vec![
            r.m.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            f(r.eps),
            f(r.dist),
            f(r.bd_minus_c),
            f(r.bd_minus_c_bound),
            f(r.f_norm),
            f(r.f_bound),
            f(r.f_bound_refined),
            f(r.sigma_min_b),
            f(r.f_identity_residual),
            f(r.sigma_min_r),
            f(r.sigma_min_r_bound),
            f(r.r_inv_norm),
            f(r.r_inv_bound),
            f(r.rewrite_residual),
            f(r.complement_leak),
            self.bounds_hold.to_string(),
        ]
    }
}

/// Trial `i` of `n` starts from a basis at distance `dist · (i + 1) / n`.
pub fn proof_diagnostics(cfg: &Resolved, out: Box<dyn Write>) -> Result<()> {
    let rows: Vec<ProofRow> = grid(cfg)
        .par_iter()
        .map(|&(m, trial)| {
            let seed = rng::derive_seed(cfg.seed, trial as u64);
            let g = ground_truth(cfg, seed)?;
            let target = cfg.dist * (trial + 1) as f64 / cfg.trials as f64;
            let u_t = basis_at_distance(&g.u_star, target, seed)?;
            let e = sample_ensemble::<f64>(cfg.d, m, rng::derive_seed(seed, 1))?;
            let report = shrinking_step_report(&g, &u_t, &e, cfg.eps)?;
            let bounds_hold = report.explicit_bounds_hold();
            Ok(ProofRow { trial, seed, report, bounds_hold })
        })
        .collect::<Result<_>>()?;
    Ok(output::write_table(out, cfg, &rows)?)
}

// ---------------------------------------------------------------- bench-regression

/// Both solvers on one grid cell, medians over repetitions.
#[derive(Serialize)]
struct BenchCell {
    d: usize,
    k: usize,
    m: usize,
    repetitions: usize,
    build_millis: Option<f64>,
    naive_solve_millis: Option<f64>,
    sketched_solve_millis: Option<f64>,
    naive_residual: f64,
    sketched_residual: f64,
    /// Worst sketched-over-naive residual across repetitions.
    max_residual_ratio: f64,
    raw: Vec<BenchRow>,
}

impl CsvRow for BenchCell {
    const HEADER: &'static str = "d,k,m,repetitions,build_millis,naive_solve_millis,sketched_solve_millis,\
                                  naive_residual,sketched_residual,max_residual_ratio";

    fn cells(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.k.to_string(),
            self.m.to_string(),
            self.repetitions.to_string(),
            opt(self.build_millis),
            opt(self.naive_solve_millis),
            opt(self.sketched_solve_millis),
            f(self.naive_residual),
            f(self.sketched_residual),
            f(self.max_residual_ratio),
        ]
    }
}

fn bench_cell(cfg: &Resolved, m: usize) -> Result<BenchCell> {
    let sketched = InnerSolver::sketched(cfg.sketch_eps, cfg.sketch_delta);
    let mut raw = bench_regression(cfg.d, cfg.k, m, cfg.trials, &sketched, cfg.seed)?;
    if !cfg.timings {
        for r in &mut raw {
            r.build_millis = 0.0;
            r.solve_millis = 0.0;
        }
    }
    let of = |method: Method, pick: fn(&BenchRow) -> f64| -> f64 {
        median(&raw.iter().filter(|r| r.method == method).map(pick).collect::<Vec<_>>())
    };
    let timed = |x: f64| cfg.timings.then_some(x);
    Ok(BenchCell {
        d: cfg.d,
        k: cfg.k,
        m,
        repetitions: cfg.trials,
        build_millis: timed(of(Method::Naive, |r| r.build_millis)),
        naive_solve_millis: timed(of(Method::Naive, |r| r.solve_millis)),
        sketched_solve_millis: timed(of(Method::Sketched, |r| r.solve_millis)),
        naive_residual: of(Method::Naive, |r| r.residual),
        sketched_residual: of(Method::Sketched, |r| r.residual),
        max_residual_ratio: raw
            .iter()
            .filter(|r| r.method == Method::Sketched)
            .map(|r| r.residual_ratio)
            .fold(f64::NEG_INFINITY, f64::max),
        raw,
    })
}

/// Cells run one after another so timings do not compete for cores.
pub fn bench(cfg: &Resolved, out: Box<dyn Write>) -> Result<()> {
    let rows: Vec<BenchCell> = cfg.m.iter().map(|&m| bench_cell(cfg, m)).collect::<Result<_>>()?;
    Ok(output::write_table(out, cfg, &rows)?)
}
