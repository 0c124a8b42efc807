//! Alternating minimization with spectral initialization and QR
//! re-orthonormalization.
//!
//! Samples are split into `2T + 1` equal blocks (one more with
//! [`FinalFit::ExtraBlock`]): block 0 seeds `U₀`, and iteration `t` solves for
//! `V̂` on block `2t + 1` and for `Û` on block `2t + 2`.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::init_operator;
use crate::geometry::dist;
use crate::numerics::{spectral_norm, thin_qr, top_k_left_singular_vectors, DenseMatrix};
use crate::regression::{solve_sensing_step, InnerSolver};
use crate::sensing::{sample_ensemble, split_ensemble, GroundTruth, MeasurementEnsemble, MeasurementSource};
use crate::{rng, Error, Result, Scalar};

/// Distances at or below this are treated as exact recovery by [`decay_ratios`].
pub const DIST_FLOOR: f64 = 1e-12;

/// How the returned `W` pairs the final factors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalFit {
    /// One more `V` solve against `U_T` on a fresh block; `W = U_T V̂ᵀ`.
    #[default]
    ExtraBlock,
    /// `W = U_T V̂_Tᵀ`, where `V̂_T` was fitted against `U_{T−1}`.
    Literal,
}

impl std::str::FromStr for FinalFit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extra-block" => Ok(FinalFit::ExtraBlock),
            "literal" => Ok(FinalFit::Literal),
            other => Err(Error::param(format!("unknown final fit {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub d: usize,
    pub k: usize,
    pub m_per_block: usize,
    pub iterations: usize,
    pub eps0: f64,
    pub solver: InnerSolver,
    pub seed: u64,
    pub final_fit: FinalFit,
    /// Fresh samples for every half-step. `false` reuses a single block for
    /// all least-squares steps, which breaks the independence the analysis
    /// relies on; it exists for sample-starved experiments only.
    pub resample: bool,
}

impl SolverConfig {
    pub fn new(d: usize, k: usize, m_per_block: usize, iterations: usize, seed: u64) -> Self {
        SolverConfig {
            d,
            k,
            m_per_block,
            iterations,
            eps0: 1e-6,
            solver: InnerSolver::default(),
            seed,
            final_fit: FinalFit::default(),
            resample: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.d {
            return Err(Error::param(format!("k = {} must lie in 1..={}", self.k, self.d)));
        }
        if self.iterations == 0 {
            return Err(Error::param("need at least one iteration"));
        }
        if self.m_per_block < self.d * self.k {
            return Err(Error::param(format!("m_per_block = {} below d·k = {}", self.m_per_block, self.d * self.k)));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 0.1) {
            return Err(Error::param(format!("eps0 = {} must lie in (0, 0.1)", self.eps0)));
        }
        Ok(())
    }

    pub fn num_blocks(&self) -> usize {
        let extra = usize::from(self.final_fit == FinalFit::ExtraBlock);
        if self.resample {
            2 * self.iterations + 1 + extra
        } else {
            2
        }
    }

    pub fn total_samples(&self) -> usize {
        self.num_blocks() * self.m_per_block
    }

    fn block_for(&self, half_step: usize) -> usize {
        if self.resample {
            half_step
        } else {
            1
        }
    }
}

/// Per-iteration state. Row `t = 0` describes the spectral initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `dist(U_t, U*)`.
    pub dist_u: Option<f64>,
    /// `dist(V_t, V*)`; absent at `t = 0`.
    pub dist_v: Option<f64>,
    /// `‖W_t − W*‖ / ‖W*‖` with `W_0` the initialization operator, `W_t = Û_t V_tᵀ`
    /// for `0 < t < T`, and `W_T` the returned estimate.
    pub rel_error: Option<f64>,
    pub abs_error: Option<f64>,
    /// Relative residual `‖Mv − b‖ / ‖b‖` of the iteration's `U` solve.
    pub residual: Option<f64>,
    pub millis: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
    pub total_samples: usize,
    pub sampling_millis: f64,
    pub init_millis: f64,
    pub iterate_millis: f64,
    pub final_fit_millis: f64,
}

impl ConvergenceTrace {
    pub fn final_rel_error(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.rel_error)
    }

    pub fn total_millis(&self) -> f64 {
        self.sampling_millis + self.init_millis + self.iterate_millis + self.final_fit_millis
    }

    /// CSV with columns `t,dist_U,dist_V,rel_error,residual,millis`; absent
    /// values are empty cells, floats carry 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "t,dist_U,dist_V,rel_error,residual,millis")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.t,
                fmt_opt(r.dist_u),
                fmt_opt(r.dist_v),
                fmt_opt(r.rel_error),
                fmt_opt(r.residual),
                fmt_f64(r.millis)
            )?;
        }
        Ok(())
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

#[derive(Clone, Debug)]
pub struct SensingRun<T> {
    /// The recovered d×d estimate.
    pub w: DenseMatrix<T>,
    pub u: DenseMatrix<T>,
    pub v: DenseMatrix<T>,
    pub trace: ConvergenceTrace,
}

/// Sample fresh blocks from `source` and run alternating minimization.
pub fn fast_matrix_sensing<T: Scalar, S: MeasurementSource<T> + ?Sized>(
    cfg: &SolverConfig,
    source: &S,
) -> Result<SensingRun<T>> {
    cfg.validate()?;
    if source.dim() != cfg.d {
        return Err(Error::dims(format!("source dimension {} vs config d = {}", source.dim(), cfg.d)));
    }
    let started = Instant::now();
    let all = sample_ensemble::<T>(cfg.d, cfg.total_samples(), cfg.seed)?;
    let b = source.measure(&all)?;
    let blocks = split_ensemble(&all, &b, cfg.num_blocks())?;
    let sampling_millis = millis_since(started);
    let mut run = alternate(cfg, &blocks, source.ground_truth(), None)?;
    run.trace.sampling_millis = sampling_millis;
    Ok(run)
}

/// Alternating minimization over pre-split blocks.
///
/// `initial` replaces the spectral initialization when given (block 0 is
/// then unused). `truth` is only read to populate the trace.
pub fn alternate<T: Scalar>(
    cfg: &SolverConfig,
    blocks: &[(MeasurementEnsemble<T>, Vec<T>)],
    truth: Option<&GroundTruth<T>>,
    initial: Option<DenseMatrix<T>>,
) -> Result<SensingRun<T>> {
    cfg.validate()?;
    let needed = cfg.num_blocks();
    if blocks.len() < needed {
        return Err(Error::InsufficientSamples { needed, available: blocks.len() });
    }
    let scorer = truth.map(Scorer::new);
    let mut trace =
        ConvergenceTrace { total_samples: blocks[..needed].iter().map(|(e, _)| e.m).sum(), ..Default::default() };

    let started = Instant::now();
    let (e0, b0) = &blocks[0];
    let w0 = init_operator(e0, b0)?;
    let mut u = match initial {
        Some(u0) => u0,
        None => top_k_left_singular_vectors(&w0, cfg.k)?,
    };
    let init_millis = millis_since(started);
    trace.init_millis = init_millis;
    trace.records.push(IterationRecord {
        t: 0,
        dist_u: scorer.as_ref().map(|s| s.dist_u(&u)).transpose()?,
        dist_v: None,
        rel_error: scorer.as_ref().map(|s| s.rel_error(&w0)),
        abs_error: scorer.as_ref().map(|s| s.abs_error(&w0)),
        residual: None,
        millis: init_millis,
    });

    let loop_started = Instant::now();
    let mut last_v_hat = DenseMatrix::zeros(cfg.d, cfg.k);
    for t in 1..=cfg.iterations {
        let step_started = Instant::now();
        let (ev, bv) = &blocks[cfg.block_for(2 * t - 1)];
        let v_step = solve_sensing_step(&u, ev, bv, &cfg.solver, rng::derive_seed(cfg.seed, (2 * t - 1) as u64))?;
        let v = orthonormalize(&v_step.v_hat, t)?;
        last_v_hat = v_step.v_hat;

        let (eu, bu) = &blocks[cfg.block_for(2 * t)];
        let u_step =
            solve_sensing_step(&v, &eu.swapped(), bu, &cfg.solver, rng::derive_seed(cfg.seed, (2 * t) as u64))?;
        u = orthonormalize(&u_step.v_hat, t)?;

        let w_t = u_step.v_hat.matmul_t(&v);
        trace.records.push(IterationRecord {
            t,
            dist_u: scorer.as_ref().map(|s| s.dist_u(&u)).transpose()?,
            dist_v: scorer.as_ref().map(|s| s.dist_v(&v)).transpose()?,
            rel_error: scorer.as_ref().map(|s| s.rel_error(&w_t)),
            abs_error: scorer.as_ref().map(|s| s.abs_error(&w_t)),
            residual: Some(relative(u_step.residual_norm, bu)),
            millis: millis_since(step_started),
        });
    }
    trace.iterate_millis = millis_since(loop_started);

    let fit_started = Instant::now();
    let (w, v_final) = match cfg.final_fit {
        FinalFit::ExtraBlock => {
            let idx = if cfg.resample { needed - 1 } else { 1 };
            let (e, b) = &blocks[idx];
            let step = solve_sensing_step(&u, e, b, &cfg.solver, rng::derive_seed(cfg.seed, idx as u64))?;
            (u.matmul_t(&step.v_hat), step.v_hat)
        }
        FinalFit::Literal => (u.matmul_t(&last_v_hat), last_v_hat),
    };
    trace.final_fit_millis = millis_since(fit_started);
    if let (Some(s), Some(last)) = (scorer.as_ref(), trace.records.last_mut()) {
        last.rel_error = Some(s.rel_error(&w));
        last.abs_error = Some(s.abs_error(&w));
    }
    Ok(SensingRun { w, u, v: v_final, trace })
}

fn orthonormalize<T: Scalar>(factor: &DenseMatrix<T>, iteration: usize) -> Result<DenseMatrix<T>> {
    match thin_qr(factor) {
        Ok(qr) => Ok(qr.q),
        Err(Error::RankDeficient { .. }) => Err(Error::RankCollapse { iteration }),
        Err(e) => Err(e),
    }
}

fn relative<T: Scalar>(residual: T, b: &[T]) -> f64 {
    let bn = crate::numerics::norm2(b).as_f64();
    if bn == 0.0 {
        residual.as_f64()
    } else {
        residual.as_f64() / bn
    }
}

fn millis_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

struct Scorer<'a, T> {
    truth: &'a GroundTruth<T>,
    w_star: DenseMatrix<T>,
    norm: f64,
}

impl<'a, T: Scalar> Scorer<'a, T> {
    fn new(truth: &'a GroundTruth<T>) -> Self {
        let w_star = truth.matrix();
        let norm = spectral_norm(&w_star).as_f64();
        Scorer { truth, w_star, norm }
    }

    fn dist_u(&self, u: &DenseMatrix<T>) -> Result<f64> {
        Ok(dist(u, &self.truth.u_star)?.as_f64())
    }

    fn dist_v(&self, v: &DenseMatrix<T>) -> Result<f64> {
        Ok(dist(v, &self.truth.v_star)?.as_f64())
    }

    fn abs_error(&self, w: &DenseMatrix<T>) -> f64 {
        spectral_norm(&(w - &self.w_star)).as_f64()
    }

    fn rel_error(&self, w: &DenseMatrix<T>) -> f64 {
        self.abs_error(w) / self.norm
    }
}

/// Which factor a half-step produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HalfStep {
    /// `dist(V_t, V*) / dist(U_{t−1}, U*)`.
    V,
    /// `dist(U_t, U*) / dist(V_t, V*)`.
    U,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRatio {
    pub t: usize,
    pub half: HalfStep,
    pub ratio: f64,
    /// Set when the distance failed to shrink: a ratio `≥ 1`, or growth away
    /// from an exactly recovered subspace.
    pub flagged: bool,
}

/// Half-step contraction ratios from a trace with ground-truth distances.
///
/// Distances at or below [`DIST_FLOOR`] count as zero: `0/0` is reported as
/// 0 and `x/0` as a flagged `+∞`.
pub fn decay_ratios(trace: &ConvergenceTrace) -> Vec<DecayRatio> {
    let clean = |d: Option<f64>| d.map(|x| if x <= DIST_FLOOR { 0.0 } else { x });
    let ratio = |num: f64, den: f64| -> (f64, bool) {
        match (num == 0.0, den == 0.0) {
            (true, _) => (0.0, false),
            (false, true) => (f64::INFINITY, true),
            _ => {
                let r = num / den;
                (r, r >= 1.0)
            }
        }
    };
    let mut out = Vec::new();
    for pair in trace.records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if let (Some(du_prev), Some(dv), Some(du)) = (clean(prev.dist_u), clean(cur.dist_v), clean(cur.dist_u)) {
            let (r, f) = ratio(dv, du_prev);
            out.push(DecayRatio { t: cur.t, half: HalfStep::V, ratio: r, flagged: f });
            let (r, f) = ratio(du, dv);
            out.push(DecayRatio { t: cur.t, half: HalfStep::U, ratio: r, flagged: f });
        }
    }
    out
}

/// `ceil(c · ln(k κ σ₁ / ε₀))`, at least 1.
pub fn required_iterations(eps0: f64, k: usize, kappa: f64, sigma1: f64, c: f64) -> Result<usize> {
    if !(eps0 > 0.0 && kappa > 0.0 && sigma1 > 0.0 && c > 0.0) || k == 0 {
        return Err(Error::param("required_iterations needs positive arguments"));
    }
    let t = (c * (k as f64 * kappa * sigma1 / eps0).ln()).ceil();
    Ok(if t < 1.0 { 1 } else { t as usize })
}
