//! Block matrices of one alternating step.
//!
//! For `U_t` fixed, with `z_i = (U_tᵀx_i) ⊗ y_i` and `w_i = (U*ᵀx_i) ⊗ y_i`
//! (block `p` occupies indices `p·d..(p+1)·d`):
//!
//! * `B = Σ z_i z_iᵀ`, `C = Σ z_i w_iᵀ`,
//! * `D_{pq} = (u_{t,p}ᵀ u_{*,q}) I_d`, `S_{pp} = σ_p* I_d`,
//! * `vec(F) = B⁻¹(BD − C) S vec(V*)`,
//!
//! where `vec` stacks the columns of a d×k matrix. The least-squares `V̂` over
//! the same ensemble then equals `W*ᵀU_t − F` exactly.

use serde::{Deserialize, Serialize};

use crate::geometry::dist;
use crate::numerics::linsolve::{cholesky, solve_lower, solve_lower_transpose, solve_upper};
use crate::numerics::{singular_values, spectral_norm, thin_qr, unvectorize, vectorize, DenseMatrix};
use crate::regression::{solve_qr, RegressionProblem};
use crate::sensing::{GroundTruth, MeasurementEnsemble};
use crate::{rng, Error, Result, Scalar};

/// Largest `d·k` accepted by [`build_block_matrices`].
pub const MAX_BLOCK_DIM: usize = 4096;
/// `σ_min(B)` floor below which `B` is reported singular.
pub const SINGULAR_B_TOL: f64 = 1e-10;

/// `B`, `C` carry raw sums over the `m` pairs; divide by `m` for averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrices<T> {
    pub b: DenseMatrix<T>,
    pub c: DenseMatrix<T>,
    pub d: DenseMatrix<T>,
    pub s: DenseMatrix<T>,
    pub f: DenseMatrix<T>,
    pub m: usize,
}

fn check_inputs<T: Scalar>(g: &GroundTruth<T>, u_t: &DenseMatrix<T>, e: &MeasurementEnsemble<T>) -> Result<()> {
    if u_t.shape() != (g.d, g.k) || e.d != g.d {
        return Err(Error::dims(format!(
            "U_t is {}x{}, ensemble d = {}, target is {}x{}",
            u_t.rows(),
            u_t.cols(),
            e.d,
            g.d,
            g.k
        )));
    }
    if g.d * g.k > MAX_BLOCK_DIM {
        return Err(Error::param(format!("d·k = {} exceeds {MAX_BLOCK_DIM}", g.d * g.k)));
    }
    let deviation = u_t.orthonormality_defect().as_f64();
    if deviation > T::ORTHO_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(())
}

/// `Σ (p_i ⊗ y_i)(q_i ⊗ y_i)ᵀ` over rows of `p`, `q` (both m×k).
fn kron_cross<T: Scalar>(p: &DenseMatrix<T>, q: &DenseMatrix<T>, y: &DenseMatrix<T>) -> DenseMatrix<T> {
    let (k, d) = (p.cols(), y.cols());
    let n = k * d;
    // Σ_i p_ia q_ib y_i y_iᵀ: accumulate the d×d block (a, b) with weight p_ia q_ib.
    let mut out = DenseMatrix::zeros(n, n);
    for a in 0..k {
        for b in 0..k {
            let weights: Vec<T> = (0..y.rows()).map(|i| p[(i, a)] * q[(i, b)]).collect();
            let scaled = DenseMatrix::from_fn(y.rows(), d, |i, j| y[(i, j)] * weights[i]);
            let block = scaled.t_matmul(y);
            for r in 0..d {
                for c in 0..d {
                    out[(a * d + r, b * d + c)] = block[(r, c)];
                }
            }
        }
    }
    out
}

pub fn build_block_matrices<T: Scalar>(
    g: &GroundTruth<T>,
    u_t: &DenseMatrix<T>,
    e: &MeasurementEnsemble<T>,
) -> Result<BlockMatrices<T>> {
    check_inputs(g, u_t, e)?;
    let (d, k) = (g.d, g.k);
    let xu_t = e.x.matmul(u_t);
    let xu_star = e.x.matmul(&g.u_star);
    let b = kron_cross(&xu_t, &xu_t, &e.y);
    let c = kron_cross(&xu_t, &xu_star, &e.y);

    let overlap = u_t.t_matmul(&g.u_star);
    let dm = DenseMatrix::from_fn(
        k * d,
        k * d,
        |r, col| {
            if r % d == col % d {
                overlap[(r / d, col / d)]
            } else {
                T::zero()
            }
        },
    );
    let s = DenseMatrix::from_fn(k * d, k * d, |r, col| if r == col { g.sigma_star[r / d] } else { T::zero() });

    let sigma_min = *singular_values(&b).last().expect("kd >= 1");
    if sigma_min.as_f64() < SINGULAR_B_TOL {
        return Err(Error::SingularB { sigma_min: sigma_min.as_f64() });
    }
    let rhs = (&b.matmul(&dm) - &c).matmul(&s).matvec(&vectorize(&g.v_star));
    let l = cholesky(&b)?;
    let f = unvectorize(&solve_lower_transpose(&l, &solve_lower(&l, &rhs)), d, k)?;
    Ok(BlockMatrices { b, c, d: dm, s, f, m: e.m })
}

/// Proof quantities for one alternating step from `U_t`.
///
/// Operator norms of `B` and `BD − C` are reported averaged over the `m`
/// pairs so they are comparable with the ε-operator scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkingReport {
    pub m: usize,
    pub eps: f64,
    pub dist: f64,
    /// `‖BD − C‖ / m`.
    pub bd_minus_c: f64,
    /// `ε · dist · k`.
    pub bd_minus_c_bound: f64,
    pub f_norm: f64,
    /// `2 ε k^{3/2} σ₁* dist`.
    pub f_bound: f64,
    /// `0.001 σ_k* dist`, the refined bound for small ε.
    pub f_bound_refined: f64,
    /// `σ_min(B) / m`, claimed at least `1/2`.
    pub sigma_min_b: f64,
    /// `‖vec(W*ᵀU_t − V̂) − vec(F)‖` relative to the larger side.
    pub f_identity_residual: f64,
    pub sigma_min_r: f64,
    /// `0.2 σ_k*`.
    pub sigma_min_r_bound: f64,
    pub r_inv_norm: f64,
    /// `10 / σ_k*`.
    pub r_inv_bound: f64,
    /// `‖P V_{t+1} + P F R⁻¹‖` relative to the larger side, `P = I − V*V*ᵀ`.
    pub rewrite_residual: f64,
    /// `‖P W*ᵀ‖`, zero up to rounding.
    pub complement_leak: f64,
}

impl ShrinkingReport {
    /// Checks with explicit constants: `σ_min(B)/m ≥ 1/2` and `σ_min(R) ≥ 0.2σ_k*`.
    pub fn explicit_bounds_hold(&self) -> bool {
        self.sigma_min_b >= 0.5 && self.sigma_min_r >= self.sigma_min_r_bound
    }
}

fn relative_gap<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> f64 {
    let scale = spectral_norm(a).max(spectral_norm(b)).as_f64();
    let gap = spectral_norm(&(a - b)).as_f64();
    if scale == 0.0 {
        gap
    } else {
        gap / scale
    }
}

pub fn shrinking_step_report<T: Scalar>(
    g: &GroundTruth<T>,
    u_t: &DenseMatrix<T>,
    e: &MeasurementEnsemble<T>,
    eps: f64,
) -> Result<ShrinkingReport> {
    let blocks = build_block_matrices(g, u_t, e)?;
    let (d, k) = (g.d, g.k);
    let inv_m = 1.0 / e.m as f64;
    let dist_t = dist(&g.u_star, u_t)?.as_f64();
    let sigma1 = g.sigma_max().as_f64();
    let sigmak = g.sigma_min().as_f64();

    let bd_minus_c = spectral_norm(&(&blocks.b.matmul(&blocks.d) - &blocks.c)).as_f64() * inv_m;
    let sigma_min_b = singular_values(&blocks.b).last().expect("kd >= 1").as_f64() * inv_m;
    let f_norm = spectral_norm(&blocks.f).as_f64();

    let b = g.measure(e)?;
    let problem = RegressionProblem::from_sensing(u_t, e, &b)?;
    let v_hat = DenseMatrix::new(d, k, solve_qr(&problem)?)?;
    let w_star_t_u = g.matrix().t_matmul(u_t);
    let f_identity_residual = relative_gap(&(&w_star_t_u - &v_hat), &blocks.f);

    let qr = thin_qr(&v_hat)?;
    let sigma_min_r = singular_values(&qr.r).last().expect("k >= 1").as_f64();
    let eye = DenseMatrix::<T>::identity(d);
    let projector = &eye - &g.v_star.matmul_t(&g.v_star);
    let r_inv_cols: Vec<Vec<T>> = (0..k).map(|j| solve_upper(&qr.r, &DenseMatrix::<T>::identity(k).col(j))).collect();
    let r_inv = DenseMatrix::from_columns(&r_inv_cols)?;
    let lhs = projector.matmul(&qr.q);
    let rhs = projector.matmul(&blocks.f).matmul(&r_inv).scale(-T::one());
    let rewrite_residual = relative_gap(&lhs, &rhs);
    let complement_leak = spectral_norm(&projector.matmul(&g.matrix().transpose())).as_f64();

    Ok(ShrinkingReport {
        m: e.m,
        eps,
        dist: dist_t,
        bd_minus_c,
        bd_minus_c_bound: eps * dist_t * k as f64,
        f_norm,
        f_bound: 2.0 * eps * (k as f64).powf(1.5) * sigma1 * dist_t,
        f_bound_refined: 0.001 * sigmak * dist_t,
        sigma_min_b,
        f_identity_residual,
        sigma_min_r,
        sigma_min_r_bound: 0.2 * sigmak,
        r_inv_norm: 1.0 / sigma_min_r,
        r_inv_bound: 10.0 / sigmak,
        rewrite_residual,
        complement_leak,
    })
}

/// A basis whose span sits at distance `dist` from `span(U*)`:
/// `(U* cos θ + Q⊥ sin θ) O` with `Q⊥` orthonormal and orthogonal to `U*`,
/// and `O` a random k×k rotation. Needs `d ≥ 2k`.
pub fn basis_at_distance<T: Scalar>(u_star: &DenseMatrix<T>, dist: f64, seed: u64) -> Result<DenseMatrix<T>> {
    let (d, k) = u_star.shape();
    if d < 2 * k {
        return Err(Error::param(format!("need d >= 2k, got d = {d}, k = {k}")));
    }
    if !(0.0..=1.0).contains(&dist) {
        return Err(Error::param(format!("dist = {dist} outside [0, 1]")));
    }
    let mut r = rng::stream(seed, rng::domain::PROBE, u64::MAX);
    let g = DenseMatrix::from_fn(d, k, |_, _| rng::gaussian::<T, _>(&mut r));
    let mut perp = &g - &u_star.matmul(&u_star.t_matmul(&g));
    perp = &perp - &u_star.matmul(&u_star.t_matmul(&perp));
    let q_perp = thin_qr(&perp)?.q;
    let (s, c) = (T::of(dist), T::of((1.0 - dist * dist).sqrt()));
    let base = &u_star.scale(c) + &q_perp.scale(s);
    let o = thin_qr(&DenseMatrix::from_fn(k, k, |_, _| rng::gaussian::<T, _>(&mut r)))?.q;
    Ok(base.matmul(&o))
}
