//! Vectorization and structured products.

use super::matrix::DenseMatrix;
use crate::{Error, Result, Scalar};

/// Column-stacking `vec`: entry `(i, j)` of a d×k matrix lands at `j·d + i`.
pub fn vectorize<T: Scalar>(a: &DenseMatrix<T>) -> Vec<T> {
    let (d, k) = a.shape();
    let mut out = Vec::with_capacity(d * k);
    for j in 0..k {
        out.extend((0..d).map(|i| a[(i, j)]));
    }
    out
}

/// Inverse of [`vectorize`].
pub fn unvectorize<T: Scalar>(v: &[T], d: usize, k: usize) -> Result<DenseMatrix<T>> {
    if v.len() != d * k || d == 0 || k == 0 {
        return Err(Error::dims(format!("length {} cannot form a {d}x{k} matrix", v.len())));
    }
    let m = DenseMatrix::from_fn(d, k, |i, j| v[j * d + i]);
    m.validate()?;
    Ok(m)
}

/// Row-wise (face-splitting) Kronecker product of an m×k `b` and an m×d `y`.
///
/// Row `i` is `vec(b_i y_iᵀ)` under column stacking of the k×d outer product,
/// i.e. entry `j·k + p` is `b[i,p]·y[i,j]`. With `b = XU` this is exactly the
/// regression design matrix whose rows are `vec(UᵀA_i)`.
pub fn row_kron<T: Scalar>(b: &DenseMatrix<T>, y: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if b.rows() != y.rows() {
        return Err(Error::dims(format!("row_kron needs equal row counts, got {} and {}", b.rows(), y.rows())));
    }
    let (m, k) = b.shape();
    let d = y.cols();
    let mut out = DenseMatrix::zeros(m, k * d);
    for i in 0..m {
        let (bi, yi) = (b.row(i), y.row(i));
        let row = out.row_mut(i);
        for (j, &yij) in yi.iter().enumerate() {
            for (p, &bip) in bi.iter().enumerate() {
                row[j * k + p] = bip * yij;
            }
        }
    }
    Ok(out)
}

/// Block-diagonal assembly of square blocks.
pub fn block_diag<T: Scalar>(blocks: &[DenseMatrix<T>]) -> DenseMatrix<T> {
    let n: usize = blocks.iter().map(|b| b.rows()).sum();
    let mut out = DenseMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                out[(off + i, off + j)] = b[(i, j)];
            }
        }
        off += b.rows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::svd::spectral_norm;
    use crate::rng;

    #[test]
    fn column_stacking() {
        let a = DenseMatrix::new(2, 2, vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(vectorize(&a), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unvectorize(&[1.0, 2.0, 3.0, 4.0], 2, 2).unwrap(), a);
        assert!(matches!(unvectorize(&[1.0; 5], 2, 2), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn trace_inner_product_identity() {
        let mut r = rng::stream(3, 0, 0);
        let x = DenseMatrix::from_fn(5, 5, |_, _| rng::gaussian::<f64, _>(&mut r));
        let y = DenseMatrix::from_fn(5, 5, |_, _| rng::gaussian::<f64, _>(&mut r));
        // Direct trace of XᵀY.
        let mut tr = 0.0;
        for j in 0..5 {
            for i in 0..5 {
                tr += x[(i, j)] * y[(i, j)];
            }
        }
        let vv: f64 = vectorize(&x).iter().zip(vectorize(&y)).map(|(a, b)| a * b).sum();
        assert!((tr - vv).abs() < 1e-12 * tr.abs().max(1.0));
        assert!((x.t_matmul(&y).trace() - vv).abs() < 1e-12 * tr.abs().max(1.0));
    }

    #[test]
    fn row_kron_examples() {
        let b = DenseMatrix::new(1, 1, vec![2.0]).unwrap();
        let y = DenseMatrix::new(1, 2, vec![1.0, 3.0]).unwrap();
        assert_eq!(row_kron(&b, &y).unwrap().as_slice(), &[2.0, 6.0]);

        // Ones in `b`: each entry of a row of `y` repeated k times.
        let ones = DenseMatrix::from_fn(2, 3, |_, _| 1.0);
        let y = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = row_kron(&ones, &y).unwrap();
        assert_eq!(m.row(0), &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(m.row(1), &[3.0, 3.0, 3.0, 4.0, 4.0, 4.0]);

        assert!(row_kron(&ones, &DenseMatrix::<f64>::zeros(3, 2)).is_err());
    }

    #[test]
    fn block_diagonal_norm_is_max_block_norm() {
        let blocks = vec![
            DenseMatrix::new(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap(),
            DenseMatrix::from_diag(&[3.5]),
            DenseMatrix::new(2, 2, vec![0.0, -3.0, 1.0, 0.0]).unwrap(),
        ];
        let s = block_diag(&blocks);
        let expected = blocks.iter().map(spectral_norm).fold(0.0, f64::max);
        assert!((spectral_norm(&s) - expected).abs() < 1e-12);
    }
}
