//! Empirical checks of the concentration objects behind the convergence
//! analysis: the initialization operator `W₀`, the `B` and `G` operators,
//! Gaussian moments, `‖Z_i‖`, and the block matrices of one shrinking step.

pub mod blocks;
pub mod moments;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::altmin::fmt_f64;
use crate::numerics::{dot, norm2, spectral_norm, DenseMatrix};
use crate::sensing::{make_ground_truth, sample_ensemble, GroundTruth, MeasurementEnsemble, SpectrumShape};
use crate::{rng, Error, Result, Scalar};

pub use blocks::{basis_at_distance, build_block_matrices, shrinking_step_report, BlockMatrices, ShrinkingReport};
pub use moments::{fourth_moment_check, z_norm_check, ZNormCheck};

fn unit_tol<T: Scalar>() -> f64 {
    1e-10_f64.max(10.0 * T::epsilon().as_f64())
}

fn check_unit<T: Scalar>(v: &[T], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::dims(format!("probe of length {} for d = {d}", v.len())));
    }
    let norm = norm2(v).as_f64();
    if (norm - 1.0).abs() > unit_tol::<T>() {
        return Err(Error::NotUnit { norm });
    }
    Ok(())
}

fn check_orthogonal<T: Scalar>(a: &[T], b: &[T]) -> Result<()> {
    let dot = dot(a, b).as_f64();
    if dot.abs() > unit_tol::<T>() {
        return Err(Error::NotOrthogonal { dot });
    }
    Ok(())
}

/// `(1/m) Σ w_l z_l z_lᵀ` over the rows `z_l` of `z`.
fn weighted_gram<T: Scalar>(z: &DenseMatrix<T>, weights: &[T]) -> DenseMatrix<T> {
    let inv_m = T::one() / T::of(weights.len() as f64);
    let scaled = DenseMatrix::from_fn(z.rows(), z.cols(), |i, j| z[(i, j)] * weights[i] * inv_m);
    scaled.t_matmul(z)
}

/// `W₀ = (1/m) Σ b_i x_i y_iᵀ`.
pub fn init_operator<T: Scalar>(e: &MeasurementEnsemble<T>, b: &[T]) -> Result<DenseMatrix<T>> {
    if b.len() != e.m {
        return Err(Error::dims(format!("{} responses for {} pairs", b.len(), e.m)));
    }
    let inv_m = T::one() / T::of(e.m as f64);
    let scaled = DenseMatrix::from_fn(e.m, e.d, |i, j| e.x[(i, j)] * b[i] * inv_m);
    Ok(scaled.t_matmul(&e.y))
}

/// `B_x = (1/m) Σ (y_lᵀv)² x_l x_lᵀ` and `B_y = (1/m) Σ (x_lᵀu)² y_l y_lᵀ`.
pub fn b_operators<T: Scalar>(
    e: &MeasurementEnsemble<T>,
    u: &[T],
    v: &[T],
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    check_unit(u, e.d)?;
    check_unit(v, e.d)?;
    let yv = e.y.matvec(v);
    let xu = e.x.matvec(u);
    let wx: Vec<T> = yv.iter().map(|&s| s * s).collect();
    let wy: Vec<T> = xu.iter().map(|&s| s * s).collect();
    Ok((weighted_gram(&e.x, &wx), weighted_gram(&e.y, &wy)))
}

/// `G_x = (1/m) Σ (y_lᵀv)(y_lᵀv_⊥) x_l x_lᵀ` and
/// `G_y = (1/m) Σ (x_lᵀu)(x_lᵀu_⊥) y_l y_lᵀ`.
pub fn g_operators<T: Scalar>(
    e: &MeasurementEnsemble<T>,
    u: &[T],
    u_perp: &[T],
    v: &[T],
    v_perp: &[T],
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    for p in [u, u_perp, v, v_perp] {
        check_unit(p, e.d)?;
    }
    check_orthogonal(u, u_perp)?;
    check_orthogonal(v, v_perp)?;
    let (yv, yvp) = (e.y.matvec(v), e.y.matvec(v_perp));
    let (xu, xup) = (e.x.matvec(u), e.x.matvec(u_perp));
    let wx: Vec<T> = yv.iter().zip(&yvp).map(|(&a, &b)| a * b).collect();
    let wy: Vec<T> = xu.iter().zip(&xup).map(|(&a, &b)| a * b).collect();
    Ok((weighted_gram(&e.x, &wx), weighted_gram(&e.y, &wy)))
}

/// `ceil(C · ε⁻² · (d + k²) · ln(d/δ))`.
pub fn sample_size(eps: f64, delta: f64, d: usize, k: usize, c: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("eps = {eps} outside (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("delta = {delta} outside (0, 1)")));
    }
    if !(c > 0.0) || d == 0 {
        return Err(Error::param("need C > 0 and d >= 1"));
    }
    let raw = c * (d as f64 + (k * k) as f64) * (d as f64 / delta).ln() / (eps * eps);
    Ok(raw.ceil() as u64)
}

/// A random probe `(u, u_⊥, v, v_⊥)` of unit vectors with `uᵀu_⊥ = vᵀv_⊥ = 0`.
#[derive(Clone, Debug)]
pub struct Probe<T> {
    pub u: Vec<T>,
    pub u_perp: Vec<T>,
    pub v: Vec<T>,
    pub v_perp: Vec<T>,
}

impl<T: Scalar> Probe<T> {
    pub fn random(d: usize, seed: u64, index: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::param("orthogonal probes need d >= 2"));
        }
        let mut r = rng::stream(seed, rng::domain::PROBE, index);
        let mut pair = || {
            let a = unit(rng::gaussian_vec::<T, _>(&mut r, d));
            let mut b: Vec<T> = rng::gaussian_vec(&mut r, d);
            for _ in 0..2 {
                let proj = dot(&a, &b);
                b.iter_mut().zip(&a).for_each(|(x, &y)| *x -= proj * y);
            }
            (a, unit(b))
        };
        let (u, u_perp) = pair();
        let (v, v_perp) = pair();
        Ok(Probe { u, u_perp, v, v_perp })
    }
}

fn unit<T: Scalar>(v: Vec<T>) -> Vec<T> {
    let n = norm2(&v);
    v.into_iter().map(|x| x / n).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassFlags {
    pub init: bool,
    pub b_x: bool,
    pub b_y: bool,
    pub g_x: bool,
    pub g_y: bool,
}

impl PassFlags {
    pub fn all(&self) -> bool {
        self.init && self.b_x && self.b_y && self.g_x && self.g_y
    }
}

/// Operator deviations for one measurement set, each the worst over probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorReport {
    pub epsilon_target: f64,
    /// `‖W₀ − W*‖ / ‖W*‖`.
    pub init_error: f64,
    pub b_x_error: f64,
    pub b_y_error: f64,
    pub g_x_norm: f64,
    pub g_y_norm: f64,
    pub z_max_norm: f64,
    pub probes: usize,
    pub passed: PassFlags,
}

/// Evaluate every ε-operator property against `eps`.
///
/// `W₀` comes from `e_init`, the `B`/`G` operators from `e_probe` under
/// `probes` random probe quadruples.
pub fn check_all<T: Scalar>(
    g: &GroundTruth<T>,
    e_init: &MeasurementEnsemble<T>,
    e_probe: &MeasurementEnsemble<T>,
    eps: f64,
    probes: usize,
    seed: u64,
) -> Result<OperatorReport> {
    if probes == 0 {
        return Err(Error::param("need at least one probe"));
    }
    let b = g.measure(e_init)?;
    let w_star = g.matrix();
    let w0 = init_operator(e_init, &b)?;
    let init_error = (spectral_norm(&(&w0 - &w_star)) / spectral_norm(&w_star)).as_f64();
    let z_max_norm = z_norm_check(g, e_init, 1.0)?.max_norm;

    let eye = DenseMatrix::<T>::identity(g.d);
    let (mut bx, mut by, mut gx, mut gy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in 0..probes {
        let probe = Probe::<T>::random(g.d, seed, p as u64)?;
        let (b_x, b_y) = b_operators(e_probe, &probe.u, &probe.v)?;
        let (g_x, g_y) = g_operators(e_probe, &probe.u, &probe.u_perp, &probe.v, &probe.v_perp)?;
        bx = bx.max(spectral_norm(&(&b_x - &eye)).as_f64());
        by = by.max(spectral_norm(&(&b_y - &eye)).as_f64());
        gx = gx.max(spectral_norm(&g_x).as_f64());
        gy = gy.max(spectral_norm(&g_y).as_f64());
    }
    Ok(OperatorReport {
        epsilon_target: eps,
        init_error,
        b_x_error: bx,
        b_y_error: by,
        g_x_norm: gx,
        g_y_norm: gy,
        z_max_norm,
        probes,
        passed: PassFlags { init: init_error <= eps, b_x: bx <= eps, b_y: by <= eps, g_x: gx <= eps, g_y: gy <= eps },
    })
}

/// One row of an operator-concentration sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub init_error: f64,
    pub bx_error: f64,
    pub by_error: f64,
    pub gx_norm: f64,
    pub gy_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d: usize,
    pub k: usize,
    pub kappa: f64,
    pub ms: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

/// Every `(m, trial)` cell gets its own planted target, ensemble, and probe,
/// all derived from `(seed, trial, m)`; rows come back in `(m, trial)` order.
pub fn operator_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.ms.is_empty() || cfg.trials == 0 {
        return Err(Error::param("sweep needs at least one m and one trial"));
    }
    let cells: Vec<(usize, usize)> = cfg.ms.iter().flat_map(|&m| (0..cfg.trials).map(move |t| (m, t))).collect();
    let rows: Result<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(m, trial)| {
            let trial_seed = rng::derive_seed(cfg.seed, trial as u64);
            let g = make_ground_truth::<f64>(cfg.d, cfg.k, cfg.kappa, SpectrumShape::Geometric, trial_seed)?;
            let e = sample_ensemble::<f64>(cfg.d, m, rng::derive_seed(trial_seed, m as u64))?;
            let r = check_all(&g, &e, &e, f64::INFINITY, 1, rng::derive_seed(trial_seed, !(m as u64)))?;
            Ok(SweepRow {
                m,
                d: cfg.d,
                k: cfg.k,
                seed: trial_seed,
                init_error: r.init_error,
                bx_error: r.b_x_error,
                by_error: r.b_y_error,
                gx_norm: r.g_x_norm,
                gy_norm: r.g_y_norm,
            })
        })
        .collect();
    rows
}

pub fn write_sweep_csv(rows: &[SweepRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "m,d,k,seed,init_error,bx_error,by_error,gx_norm,gy_norm")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.m,
            r.d,
            r.k,
            r.seed,
            fmt_f64(r.init_error),
            fmt_f64(r.bx_error),
            fmt_f64(r.by_error),
            fmt_f64(r.gx_norm),
            fmt_f64(r.gy_norm)
        )?;
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
