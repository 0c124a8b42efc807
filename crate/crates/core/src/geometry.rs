//! Principal-angle distances between k-dimensional column spaces.
//!
//! Both arguments must have orthonormal columns. The orthogonal complement of
//! `Y` is never formed; `sin θ` is evaluated through the projector as
//! `‖X − Y(YᵀX)‖`.

use crate::numerics::{singular_values, spectral_norm, DenseMatrix};
use crate::{Error, Result, Scalar};

fn check_pair<T: Scalar>(y: &DenseMatrix<T>, x: &DenseMatrix<T>) -> Result<()> {
    if y.shape() != x.shape() {
        return Err(Error::dims(format!(
            "subspace bases {}x{} and {}x{} differ",
            y.rows(),
            y.cols(),
            x.rows(),
            x.cols()
        )));
    }
    for f in [y, x] {
        let deviation = f.orthonormality_defect().as_f64();
        if deviation > T::ORTHO_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
    }
    Ok(())
}

fn clamp_unit<T: Scalar>(v: T) -> T {
    v.max(T::zero()).min(T::one())
}

/// `sin θ(Y, X) = ‖(I − YYᵀ)X‖`, clamped to `[0, 1]`.
pub fn sin_theta<T: Scalar>(y: &DenseMatrix<T>, x: &DenseMatrix<T>) -> Result<T> {
    check_pair(y, x)?;
    let residual = x - &y.matmul(&y.t_matmul(x));
    Ok(clamp_unit(spectral_norm(&residual)))
}

/// `cos θ(Y, X) = σ_min(YᵀX)`, clamped to `[0, 1]`.
pub fn cos_theta<T: Scalar>(y: &DenseMatrix<T>, x: &DenseMatrix<T>) -> Result<T> {
    check_pair(y, x)?;
    let s = singular_values(&y.t_matmul(x));
    Ok(clamp_unit(*s.last().expect("k >= 1")))
}

/// `tan θ = sin θ / cos θ`; `+∞` once `cos θ` falls below `RANK_TOL`.
pub fn tan_theta<T: Scalar>(y: &DenseMatrix<T>, x: &DenseMatrix<T>) -> Result<T> {
    let s = sin_theta(y, x)?;
    let c = cos_theta(y, x)?;
    if c.as_f64() < T::RANK_TOL {
        Ok(T::infinity())
    } else {
        Ok(s / c)
    }
}

/// Subspace distance, `dist(Y, X) = sin θ(Y, X)`.
pub fn dist<T: Scalar>(y: &DenseMatrix<T>, x: &DenseMatrix<T>) -> Result<T> {
    sin_theta(y, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::thin_qr;
    use crate::rng;

    fn col(v: &[f64]) -> DenseMatrix<f64> {
        DenseMatrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    fn random_basis(d: usize, k: usize, seed: u64) -> DenseMatrix<f64> {
        let mut r = rng::stream(seed, 0, 0);
        thin_qr(&DenseMatrix::from_fn(d, k, |_, _| rng::gaussian(&mut r))).unwrap().q
    }

    #[test]
    fn identical_subspaces() {
        let y = random_basis(7, 3, 1);
        assert!(sin_theta(&y, &y).unwrap() < 1e-14);
        assert!((cos_theta(&y, &y).unwrap() - 1.0).abs() < 1e-14);
        assert!(tan_theta(&y, &y).unwrap() < 1e-14);
    }

    #[test]
    fn planar_rotation() {
        let theta = 0.3_f64;
        let y = col(&[1.0, 0.0]);
        let x = col(&[theta.cos(), theta.sin()]);
        assert!((sin_theta(&y, &x).unwrap() - theta.sin()).abs() < 1e-15);
        assert!((cos_theta(&y, &x).unwrap() - theta.cos()).abs() < 1e-15);
        assert!((tan_theta(&y, &x).unwrap() - theta.tan()).abs() < 1e-15);
        assert_eq!(dist(&y, &x).unwrap(), sin_theta(&y, &x).unwrap());
    }

    #[test]
    fn orthogonal_subspaces() {
        let q = random_basis(6, 4, 2);
        let (y, x) = (q.columns(0..2), q.columns(2..4));
        assert!((sin_theta(&y, &x).unwrap() - 1.0).abs() < 1e-14);
        assert!(cos_theta(&y, &x).unwrap() < 1e-14);
        assert!(tan_theta(&y, &x).unwrap().is_infinite());
    }

    #[test]
    fn rejects_non_orthonormal_and_mismatched() {
        let y = col(&[1.0, 0.0]);
        assert!(matches!(sin_theta(&y, &col(&[2.0, 0.0])), Err(Error::NotOrthonormal { .. })));
        assert!(matches!(cos_theta(&y, &col(&[1.0, 0.0, 0.0])), Err(Error::DimensionMismatch(_))));
    }
}
