//! Thin Householder QR with a positive-diagonal convention.

use super::matrix::{dot, norm2, DenseMatrix};
use super::svd::singular_values;
use crate::{Error, Result, Scalar};

/// Thin factorization `A = QR` with `Q` d×k orthonormal and `R` k×k upper
/// triangular with nonnegative diagonal.
#[derive(Clone, Debug)]
pub struct ThinQr<T> {
    pub q: DenseMatrix<T>,
    pub r: DenseMatrix<T>,
}

/// Thin QR of a full-column-rank `A` (d ≥ k).
///
/// Fails with [`Error::RankDeficient`] when `σ_min(A) ≤ RANK_TOL · σ_max(A)`.
/// The singular values are those of `R`, so the test costs O(k³) on top of
/// the factorization.
pub fn thin_qr<T: Scalar>(a: &DenseMatrix<T>) -> Result<ThinQr<T>> {
    let qr = householder_qr(a)?;
    let s = singular_values(&qr.r);
    let smax = s.first().copied().unwrap_or(T::zero());
    let smin = s.last().copied().unwrap_or(T::zero());
    let ratio = if smax > T::zero() { (smin / smax).as_f64() } else { 0.0 };
    if !(ratio > T::RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    Ok(qr)
}

/// Householder QR without the rank test. Rank-deficient inputs still give
/// `QR = A`, with zero (or tiny) diagonal entries in `R`.
pub fn householder_qr<T: Scalar>(a: &DenseMatrix<T>) -> Result<ThinQr<T>> {
    let (d, k) = a.shape();
    let (mut r, reflectors) = reduce(a)?;

    // Q = H_0 H_1 ... H_{k-1} applied to the first k columns of I.
    let mut q_cols: Vec<Vec<T>> = (0..k)
        .map(|j| {
            let mut e = vec![T::zero(); d];
            e[j] = T::one();
            e
        })
        .collect();
    for (j, v) in reflectors.iter().enumerate().rev() {
        if v.iter().all(|&e| e == T::zero()) {
            continue;
        }
        for col in q_cols.iter_mut().skip(j) {
            reflect(v, &mut col[j..]);
        }
    }

    for j in 0..k {
        if r[(j, j)] < T::zero() {
            for c in j..k {
                r[(j, c)] = -r[(j, c)];
            }
            q_cols[j].iter_mut().for_each(|e| *e = -*e);
        }
    }

    let q = DenseMatrix::from_fn(d, k, |i, j| q_cols[j][i]);
    Ok(ThinQr { q, r })
}

/// The `R` factor alone, same sign convention as [`householder_qr`].
pub fn householder_r<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let k = a.cols();
    let (mut r, _) = reduce(a)?;
    for j in 0..k {
        if r[(j, j)] < T::zero() {
            for c in j..k {
                r[(j, c)] = -r[(j, c)];
            }
        }
    }
    Ok(r)
}

fn reflect<T: Scalar>(v: &[T], tail: &mut [T]) {
    let proj = T::of(2.0) * dot(v, tail);
    for (t, &vi) in tail.iter_mut().zip(v) {
        *t -= proj * vi;
    }
}

/// Triangularize `A` in place, returning unsigned `R` and unit reflectors.
fn reduce<T: Scalar>(a: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Vec<Vec<T>>)> {
    let (d, k) = a.shape();
    if d < k {
        return Err(Error::dims(format!("thin QR needs rows >= cols, got {d}x{k}")));
    }
    // Column-major working copy: reflectors touch whole columns.
    let mut cols: Vec<Vec<T>> = (0..k).map(|j| a.col(j)).collect();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(k);
    let mut r = DenseMatrix::zeros(k, k);

    for j in 0..k {
        let x = &cols[j][j..];
        let alpha = norm2(x);
        let mut v = x.to_vec();
        if alpha > T::zero() {
            let sign = if v[0] >= T::zero() { T::one() } else { -T::one() };
            v[0] += sign * alpha;
            let vnorm = norm2(&v);
            for e in v.iter_mut() {
                *e /= vnorm;
            }
            for col in cols.iter_mut().skip(j) {
                reflect(&v, &mut col[j..]);
            }
        } else {
            v.iter_mut().for_each(|e| *e = T::zero());
        }
        for i in 0..=j {
            r[(i, j)] = cols[j][i];
        }
        reflectors.push(v);
    }
    Ok((r, reflectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix<f64> {
        let mut r = rng::stream(seed, 0, 0);
        DenseMatrix::from_fn(rows, cols, |_, _| rng::gaussian(&mut r))
    }

    #[test]
    fn orthonormal_input_is_fixed_point() {
        let a = thin_qr(&random(9, 3, 1)).unwrap().q;
        let again = thin_qr(&a).unwrap();
        assert!((&again.q - &a).max_abs() < 1e-12);
        assert!((&again.r - &DenseMatrix::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn scaled_unit_vector() {
        let a = DenseMatrix::new(3, 1, vec![2.0, 0.0, 0.0]).unwrap();
        let qr = thin_qr(&a).unwrap();
        assert_eq!(qr.q.as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(qr.r.as_slice(), &[2.0]);
        // Negative direction flips into Q, keeping R positive.
        let qr = thin_qr(&a.scale(-1.0)).unwrap();
        assert_eq!(qr.q.as_slice(), &[-1.0, 0.0, 0.0]);
        assert_eq!(qr.r.as_slice(), &[2.0]);
    }

    #[test]
    fn random_reconstruction() {
        let a = random(20, 4, 2);
        let ThinQr { q, r } = thin_qr(&a).unwrap();
        assert!(q.orthonormality_defect() <= 1e-10);
        let err = (&q.matmul(&r) - &a).frobenius_norm() / a.frobenius_norm();
        assert!(err <= 1e-10, "{err}");
        for i in 0..4 {
            assert!(r[(i, i)] > 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn rank_deficient_rejected() {
        let mut a = random(6, 3, 3);
        let c0 = a.col(0);
        a.set_col(2, &c0.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
        assert!(matches!(thin_qr(&a), Err(Error::RankDeficient { .. })));
        assert!(matches!(thin_qr(&DenseMatrix::<f64>::zeros(4, 2)), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn wide_input_is_dimension_error() {
        assert!(matches!(thin_qr(&random(2, 3, 4)), Err(Error::DimensionMismatch(_))));
    }
}
