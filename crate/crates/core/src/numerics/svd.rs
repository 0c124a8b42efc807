//! Dense SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Tall inputs are first reduced to their square `R` factor, so the Jacobi
//! sweeps only ever run on an n×n matrix. Output singular values are sorted
//! descending with a stable order on ties; each left singular vector is
//! signed so its largest-magnitude entry is positive.

use super::matrix::{dot, norm2, DenseMatrix};
use super::qr::{householder_qr, householder_r};
use crate::{rng, Error, Result, Scalar};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `A = U diag(s) Vᵀ`, with `r = min(rows, cols)` triplets.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: DenseMatrix<T>,
    pub singular_values: Vec<T>,
    pub v: DenseMatrix<T>,
}

pub fn svd<T: Scalar>(a: &DenseMatrix<T>) -> Svd<T> {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.transpose());
        return Svd { u: t.v, singular_values: t.singular_values, v: t.u };
    }
    let (q, work) = if m > n {
        let qr = householder_qr(a).expect("rows >= cols");
        (Some(qr.q), qr.r)
    } else {
        (None, a.clone())
    };

    let mut g: Vec<Vec<T>> = (0..n).map(|j| work.col(j)).collect();
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    jacobi_sweeps(&mut g, Some(&mut v));

    let sigma: Vec<T> = g.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap_or(std::cmp::Ordering::Equal));

    let smax = order.first().map(|&i| sigma[i]).unwrap_or(T::zero());
    let floor = smax * T::epsilon() * T::of(n as f64);
    let mut u_cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sigma[j] > floor && sigma[j] > T::zero() {
            u_cols.push(g[j].iter().map(|&x| x / sigma[j]).collect());
        } else {
            u_cols.push(vec![T::zero(); n]);
            missing.push(slot);
        }
        v_cols.push(v[j].clone());
    }
    complete_basis(&mut u_cols, &missing);

    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let lead = uc
            .iter()
            .enumerate()
            .fold((0, T::zero()), |(bi, bv), (i, &x)| if x.abs() > bv { (i, x.abs()) } else { (bi, bv) })
            .0;
        if uc[lead] < T::zero() {
            uc.iter_mut().for_each(|x| *x = -*x);
            vc.iter_mut().for_each(|x| *x = -*x);
        }
    }

    let u_small = DenseMatrix::from_fn(n, n, |i, j| u_cols[j][i]);
    let u = match q {
        Some(q) => q.matmul(&u_small),
        None => u_small,
    };
    Svd {
        u,
        singular_values: order.iter().map(|&j| sigma[j]).collect(),
        v: DenseMatrix::from_fn(n, n, |i, j| v_cols[j][i]),
    }
}

/// Singular values only, descending.
pub fn singular_values<T: Scalar>(a: &DenseMatrix<T>) -> Vec<T> {
    let (m, n) = a.shape();
    if m < n {
        return singular_values(&a.transpose());
    }
    let work = if m > n { householder_r(a).expect("rows >= cols") } else { a.clone() };
    let mut g: Vec<Vec<T>> = (0..n).map(|j| work.col(j)).collect();
    jacobi_sweeps(&mut g, None);
    let mut s: Vec<T> = g.iter().map(|c| norm2(c)).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

fn jacobi_sweeps<T: Scalar>(g: &mut [Vec<T>], mut v: Option<&mut Vec<Vec<T>>>) {
    let n = g.len();
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&g[p], &g[p]);
                let beta = dot(&g[q], &g[q]);
                let gamma = dot(&g[p], &g[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::of(2.0) * gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(g, p, q, c, s);
                if let Some(v) = v.as_deref_mut() {
                    rotate(v, p, q, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fill the listed (zero) columns with unit vectors orthogonal to the rest.
fn complete_basis<T: Scalar>(cols: &mut [Vec<T>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let n = cols[0].len();
    let mut candidate = 0;
    for &slot in missing {
        while candidate < n {
            let mut e = vec![T::zero(); n];
            e[candidate] = T::one();
            candidate += 1;
            for _ in 0..2 {
                for (j, c) in cols.iter().enumerate() {
                    if j == slot {
                        continue;
                    }
                    let proj = dot(c, &e);
                    for (x, &y) in e.iter_mut().zip(c) {
                        *x -= proj * y;
                    }
                }
            }
            let nrm = norm2(&e);
            if nrm > T::of(0.5) {
                cols[slot] = e.into_iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}

/// Orthonormal basis of the top-k left singular subspace of `a`.
pub fn top_k_left_singular_vectors<T: Scalar>(a: &DenseMatrix<T>, k: usize) -> Result<DenseMatrix<T>> {
    let r = a.rows().min(a.cols());
    if k == 0 || k > r {
        return Err(Error::dims(format!("k = {k} outside 1..={r} for a {}x{} matrix", a.rows(), a.cols())));
    }
    Ok(svd(a).u.columns(0..k))
}

/// Largest singular value via full SVD.
pub fn spectral_norm<T: Scalar>(a: &DenseMatrix<T>) -> T {
    if a.max_abs() == T::zero() {
        return T::zero();
    }
    singular_values(a)[0]
}

/// Largest singular value by power iteration on `AᵀA`, for tall design
/// matrices where a full SVD is wasteful. Starts from a seeded Gaussian vector.
pub fn spectral_norm_power<T: Scalar>(a: &DenseMatrix<T>, tol: f64, max_iter: usize, seed: u64) -> T {
    let mut rng = rng::stream(seed, rng::domain::POWER, 0);
    let mut x: Vec<T> = rng::gaussian_vec(&mut rng, a.cols());
    let nx = norm2(&x);
    if nx == T::zero() {
        return T::zero();
    }
    x.iter_mut().for_each(|e| *e /= nx);
    let mut estimate = T::zero();
    for _ in 0..max_iter {
        let y = a.t_matvec(&a.matvec(&x));
        let ny = norm2(&y);
        if ny == T::zero() {
            return T::zero();
        }
        let next = ny.sqrt();
        x = y.into_iter().map(|e| e / ny).collect();
        let done = (next - estimate).abs() <= T::of(tol) * next;
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

/// `σ_max / σ_min`; infinite for rank-deficient input.
pub fn condition_number<T: Scalar>(a: &DenseMatrix<T>) -> T {
    let s = singular_values(a);
    let (hi, lo) = (s[0], *s.last().unwrap());
    if lo == T::zero() {
        T::infinity()
    } else {
        hi / lo
    }
}
