//! Cholesky and triangular solves for the normal equations and preconditioning.

use super::matrix::DenseMatrix;
use crate::{Error, Result, Scalar};

/// Lower Cholesky factor `L` with `A = LLᵀ`.
///
/// Fails with [`Error::IllConditioned`] when a pivot is nonpositive or the
/// squared-pivot ratio `min L_ii² / max L_ii²` drops to `RANK_TOL` or below.
pub fn cholesky<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if !a.is_square() {
        return Err(Error::dims("cholesky needs a square matrix"));
    }
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for p in 0..j {
            diag -= l[(j, p)] * l[(j, p)];
        }
        if !(diag > T::zero()) {
            return Err(Error::IllConditioned { ratio: 0.0 });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            let (ri, rj) = (l.row(i), l.row(j));
            for p in 0..j {
                s -= ri[p] * rj[p];
            }
            l[(i, j)] = s / ljj;
        }
    }
    let (lo, hi) = (0..n).fold((T::infinity(), T::zero()), |(lo, hi), i| {
        let p = l[(i, i)] * l[(i, i)];
        (lo.min(p), hi.max(p))
    });
    let ratio = (lo / hi).as_f64();
    if !(ratio > T::RANK_TOL) {
        return Err(Error::IllConditioned { ratio });
    }
    Ok(l)
}

/// Solve `Lx = b` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &DenseMatrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let mut s = x[i];
        for p in 0..i {
            s -= row[p] * x[p];
        }
        x[i] = s / row[i];
    }
    x
}

/// Solve `Lᵀx = b` for lower-triangular `L`.
pub fn solve_lower_transpose<T: Scalar>(l: &DenseMatrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[(i, i)];
        let xi = x[i];
        for p in 0..i {
            x[p] -= l[(i, p)] * xi;
        }
    }
    x
}

/// Solve `Rx = b` for upper-triangular `R`.
pub fn solve_upper<T: Scalar>(r: &DenseMatrix<T>, b: &[T]) -> Vec<T> {
    let n = r.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let row = r.row(i);
        let mut s = x[i];
        for p in i + 1..n {
            s -= row[p] * x[p];
        }
        x[i] = s / row[i];
    }
    x
}

/// Solve `Rᵀx = b` for upper-triangular `R`.
pub fn solve_upper_transpose<T: Scalar>(r: &DenseMatrix<T>, b: &[T]) -> Vec<T> {
    let n = r.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        x[i] /= r[(i, i)];
        let xi = x[i];
        let row = r.row(i);
        for p in i + 1..n {
            x[p] -= row[p] * xi;
        }
    }
    x
}

/// Solve the SPD system `Ax = b` by Cholesky.
pub fn solve_spd<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let l = cholesky(a)?;
    Ok(solve_lower_transpose(&l, &solve_lower(&l, b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn triangular_and_spd_solves() {
        let mut r = rng::stream(11, 0, 0);
        let a = DenseMatrix::from_fn(30, 6, |_, _| rng::gaussian::<f64, _>(&mut r));
        let g = a.gram();
        let x_true: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let b = g.matvec(&x_true);
        let x = solve_spd(&g, &b).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
        let l = cholesky(&g).unwrap();
        let rt = l.transpose();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-13 * y.abs().max(1.0));
        assert!(close(&solve_upper(&rt, &b), &solve_lower_transpose(&l, &b)));
        assert!(close(&solve_upper_transpose(&rt, &b), &solve_lower(&l, &b)));
    }

    #[test]
    fn singular_gram_is_ill_conditioned() {
        let a = DenseMatrix::new(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        assert!(matches!(cholesky(&a.gram()), Err(Error::IllConditioned { .. })));
    }
}
