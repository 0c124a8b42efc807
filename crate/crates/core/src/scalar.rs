//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar usable by the linear-algebra substrate.
///
/// The tolerance constants are per-precision floors: the values for `f64`
/// are the ones the numerical contracts are written against, the `f32`
/// values are scaled to that type's unit roundoff.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Relative singular-value floor below which a matrix is treated as rank deficient.
    const RANK_TOL: f64;
    /// Allowed deviation `‖QᵀQ − I‖` for a factor to count as orthonormal.
    const ORTHO_TOL: f64;

    fn of(x: f64) -> Self;

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const RANK_TOL: f64 = 1e-12;
    const ORTHO_TOL: f64 = 1e-8;

    #[inline]
    fn of(x: f64) -> Self {
        x
    }
}

impl Scalar for f32 {
    const RANK_TOL: f64 = 1e-6;
    const ORTHO_TOL: f64 = 1e-4;

    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
}
