//! Dense linear-algebra substrate.
//!
//! Everything here is a pure function of its inputs. Matrices are row-major
//! [`DenseMatrix`] values generic over [`Scalar`](crate::Scalar).

pub mod linsolve;
mod matrix;
pub mod ops;
pub mod qr;
pub mod svd;

pub use matrix::{dot, norm2, DenseMatrix};
pub use ops::{block_diag, row_kron, unvectorize, vectorize};
pub use qr::{householder_qr, householder_r, thin_qr, ThinQr};
pub use svd::{
    condition_number, singular_values, spectral_norm, spectral_norm_power, svd, top_k_left_singular_vectors, Svd,
};
