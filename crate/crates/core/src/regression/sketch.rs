//! Sketch-and-precondition least squares.
//!
//! A random embedding `S` (s×m) compresses `M`; the `R` factor of `SM` then
//! right-preconditions LSQR on `M R⁻¹`, whose condition number is O(1) when
//! `S` is a subspace embedding for the column space of `M`.
//!
//! `M` is only touched through [`LinearOperator`], so the sensing design can
//! stay in its factored face-splitting form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::linsolve::{solve_upper, solve_upper_transpose};
use crate::numerics::{dot, householder_r, norm2, DenseMatrix};
use crate::{rng, Error, Result, Scalar};

pub const MAX_ATTEMPTS: usize = 3;
pub const MAX_ITERATIONS: usize = 500;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SketchKind {
    /// Count-sketch: each row of `M` is added, with a random sign, into one
    /// random row of the sketch. Applies in O(nnz(M)).
    #[default]
    SparseEmbedding,
    /// Dense i.i.d. N(0, 1/s) sketch. O(s·m·n); a slow reference.
    Gaussian,
}

/// Number of sketch rows `s`, always clamped to `[n + 1, m]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SketchSize {
    /// `s = ceil(factor · n)`.
    Oversample(f64),
    /// `s = 4 n ceil(log₂(n/δ))`.
    Logarithmic,
    Rows(usize),
}

impl Default for SketchSize {
    fn default() -> Self {
        SketchSize::Oversample(4.0)
    }
}

impl SketchSize {
    pub fn rows(&self, m: usize, n: usize, delta: f64) -> usize {
        let raw = match *self {
            SketchSize::Oversample(f) => (f * n as f64).ceil() as usize,
            SketchSize::Logarithmic => 4 * n * ((n as f64 / delta).log2().ceil().max(1.0) as usize),
            SketchSize::Rows(s) => s,
        };
        raw.max(n + 1).min(m)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub kind: SketchKind,
    pub size: SketchSize,
}

/// Output of [`solve_sketched_with`].
#[derive(Clone, Debug)]
pub struct SketchedSolution<T> {
    pub v: Vec<T>,
    pub residual_norm: T,
    pub iterations: usize,
    pub attempts: usize,
    pub sketch_rows: usize,
}

/// A tall matrix accessed through products and single rows.
pub trait LinearOperator<T: Scalar> {
    fn shape(&self) -> (usize, usize);
    /// Writes row `i` into `out` (length `cols`).
    fn row_into(&self, i: usize, out: &mut [T]);
    fn apply(&self, x: &[T]) -> Vec<T>;
    fn apply_t(&self, y: &[T]) -> Vec<T>;
}

impl<T: Scalar> LinearOperator<T> for DenseMatrix<T> {
    fn shape(&self) -> (usize, usize) {
        DenseMatrix::shape(self)
    }

    fn row_into(&self, i: usize, out: &mut [T]) {
        out.copy_from_slice(self.row(i));
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        self.matvec(x)
    }

    fn apply_t(&self, y: &[T]) -> Vec<T> {
        self.t_matvec(y)
    }
}

/// The face-splitting product `row_kron(L, R)` kept in factored form: row `i`
/// holds `L[i,p]·R[i,j]` at column `j·k + p`, for `L` m×k and `R` m×d.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceSplitting<T> {
    pub left: DenseMatrix<T>,
    pub right: DenseMatrix<T>,
}

impl<T: Scalar> FaceSplitting<T> {
    pub fn new(left: DenseMatrix<T>, right: DenseMatrix<T>) -> Result<Self> {
        if left.rows() != right.rows() {
            return Err(Error::dims(format!("face-splitting factors have {} and {} rows", left.rows(), right.rows())));
        }
        Ok(FaceSplitting { left, right })
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        crate::numerics::row_kron(&self.left, &self.right).expect("row counts checked in new")
    }

    /// `x` viewed as the k×d matrix `Xᵀ` with `X[j,p] = x[j·k + p]`.
    fn columns_of(&self, x: &[T]) -> DenseMatrix<T> {
        let (k, d) = (self.left.cols(), self.right.cols());
        DenseMatrix::from_fn(k, d, |p, j| x[j * k + p])
    }
}

impl<T: Scalar> LinearOperator<T> for FaceSplitting<T> {
    fn shape(&self) -> (usize, usize) {
        (self.left.rows(), self.left.cols() * self.right.cols())
    }

    fn row_into(&self, i: usize, out: &mut [T]) {
        let k = self.left.cols();
        let l = self.left.row(i);
        for (j, &r) in self.right.row(i).iter().enumerate() {
            for (o, &lp) in out[j * k..(j + 1) * k].iter_mut().zip(l) {
                *o = lp * r;
            }
        }
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.shape().1);
        // (Mx)_i = Σ_p L[i,p] · (R_i · X[:,p]).
        let proj = self.right.matmul_t(&self.columns_of(x));
        (0..self.left.rows()).map(|i| dot(self.left.row(i), proj.row(i))).collect()
    }

    fn apply_t(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.left.rows());
        let (k, d) = (self.left.cols(), self.right.cols());
        let weighted = DenseMatrix::from_fn(self.left.rows(), k, |i, p| self.left[(i, p)] * y[i]);
        // Lᵀ diag(y) R is k×d; entry (p, j) lands at j·k + p.
        let g = weighted.t_matmul(&self.right);
        let mut out = vec![T::zero(); k * d];
        for p in 0..k {
            for j in 0..d {
                out[j * k + p] = g[(p, j)];
            }
        }
        out
    }
}

/// `S·M` for a freshly drawn sketch.
pub fn apply_sketch<T: Scalar, A: LinearOperator<T> + ?Sized, R: Rng + ?Sized>(
    kind: SketchKind,
    m: &A,
    s: usize,
    rng: &mut R,
) -> DenseMatrix<T> {
    let (rows, n) = m.shape();
    let mut out = DenseMatrix::zeros(s, n);
    match kind {
        SketchKind::SparseEmbedding => {
            let mut row = vec![T::zero(); n];
            for i in 0..rows {
                let bucket = rng.random_range(0..s);
                let sign = if rng.random::<bool>() { T::one() } else { -T::one() };
                m.row_into(i, &mut row);
                for (o, &v) in out.row_mut(bucket).iter_mut().zip(&row) {
                    *o += sign * v;
                }
            }
        }
        SketchKind::Gaussian => {
            let scale = T::one() / T::of(s as f64).sqrt();
            for r in 0..s {
                let g: Vec<T> = rng::gaussian_vec(rng, rows);
                let row = m.apply_t(&g);
                for (o, v) in out.row_mut(r).iter_mut().zip(row) {
                    *o = v * scale;
                }
            }
        }
    }
    out
}

/// Expected condition number of `M R⁻¹` for an s-row embedding of an
/// n-dimensional subspace, `(1 + √(n/s)) / (1 − √(n/s))`.
fn distortion_estimate(n: usize, s: usize) -> f64 {
    let r = (n as f64 / s as f64).sqrt();
    if r >= 0.99 {
        100.0
    } else {
        (1.0 + r) / (1.0 - r)
    }
}

/// Sketched least squares with the `(1 + eps)` residual guarantee.
///
/// `delta` only enters through [`SketchSize::Logarithmic`]; with the other
/// sizes a poor sketch costs iterations, not accuracy.
pub fn solve_sketched_with<T: Scalar, A: LinearOperator<T> + ?Sized>(
    m: &A,
    b: &[T],
    config: &SketchConfig,
    eps: f64,
    delta: f64,
    seed: u64,
) -> Result<SketchedSolution<T>> {
    let (rows, n) = m.shape();
    if b.len() != rows {
        return Err(Error::dims(format!("{} responses for {rows} rows", b.len())));
    }
    if rows < 2 * n {
        return Err(Error::param(format!("sketched solve needs m >= 2·dk, got m = {rows}, dk = {n}")));
    }
    if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param(format!("eps = {eps}, delta = {delta} must lie in (0, 1)")));
    }
    let s = config.size.rows(rows, n, delta);

    for attempt in 0..MAX_ATTEMPTS {
        let mut r = rng::stream(seed, rng::domain::SKETCH, attempt as u64);
        let sm = apply_sketch(config.kind, m, s, &mut r);
        let pre = householder_r(&sm)?;
        let (lo, hi) = (0..n).fold((T::infinity(), T::zero()), |(lo, hi), i| {
            let v = pre[(i, i)].abs();
            (lo.min(v), hi.max(v))
        });
        if !(hi > T::zero() && (lo / hi).as_f64() > T::RANK_TOL) {
            continue;
        }
        let tol = eps / (10.0 * distortion_estimate(n, s));
        let (w, iterations) = lsqr_preconditioned(m, &pre, b, tol, eps)?;
        let v = solve_upper(&pre, &w);
        let fitted = m.apply(&v);
        let residual: Vec<T> = fitted.iter().zip(b).map(|(&f, &bi)| f - bi).collect();
        return Ok(SketchedSolution {
            v,
            residual_norm: norm2(&residual),
            iterations,
            attempts: attempt + 1,
            sketch_rows: s,
        });
    }
    Err(Error::SketchRankDeficient { attempts: MAX_ATTEMPTS })
}

/// LSQR on `A = M R⁻¹`.
///
/// Stops when the normal-equation residual is small relative to the
/// residual itself, `‖Aᵀr‖ ≤ tol·‖A‖·‖r‖`, or when the system is consistent
/// to `‖r‖ ≤ tol·eps·‖b‖`. `‖A‖` is the running lower bound from the
/// bidiagonalization, which only makes the first test stricter.
fn lsqr_preconditioned<T: Scalar, A: LinearOperator<T> + ?Sized>(
    m: &A,
    pre: &DenseMatrix<T>,
    b: &[T],
    tol: f64,
    eps: f64,
) -> Result<(Vec<T>, usize)> {
    let n = m.shape().1;
    let apply = |w: &[T]| m.apply(&solve_upper(pre, w));
    let apply_t = |u: &[T]| solve_upper_transpose(pre, &m.apply_t(u));
    let tol_t = T::of(tol);
    let btol = T::of(tol * eps);

    let mut x = vec![T::zero(); n];
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        return Ok((x, 0));
    }
    let mut u: Vec<T> = b.iter().map(|&v| v / bnorm).collect();
    let mut beta = bnorm;
    let mut v = apply_t(&u);
    let mut alpha = norm2(&v);
    if alpha == T::zero() {
        return Ok((x, 0));
    }
    v.iter_mut().for_each(|e| *e /= alpha);
    let mut w = v.clone();
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm = alpha;
    let mut gradient = alpha * beta;

    for it in 1..=MAX_ITERATIONS {
        let av = apply(&v);
        u = av.iter().zip(&u).map(|(&a, &p)| a - alpha * p).collect();
        beta = norm2(&u);
        if beta > T::zero() {
            u.iter_mut().for_each(|e| *e /= beta);
        }
        let atu = apply_t(&u);
        v = atu.iter().zip(&v).map(|(&a, &p)| a - beta * p).collect();
        alpha = norm2(&v);
        if alpha > T::zero() {
            v.iter_mut().for_each(|e| *e /= alpha);
        }
        anorm = anorm.max(alpha).max(beta);

        let rho = (rhobar * rhobar + beta * beta).sqrt();
        let c = rhobar / rho;
        let s = beta / rho;
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar = s * phibar;

        let step = phi / rho;
        let shrink = theta / rho;
        for ((xi, wi), &vi) in x.iter_mut().zip(w.iter_mut()).zip(&v) {
            *xi += step * *wi;
            *wi = vi - shrink * *wi;
        }

        let rnorm = phibar;
        gradient = phibar * alpha * c.abs();
        if rnorm <= btol * bnorm || gradient <= tol_t * anorm * rnorm || alpha == T::zero() {
            return Ok((x, it));
        }
    }
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS, gradient: gradient.as_f64() })
}
