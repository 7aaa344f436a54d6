//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, LowerExp};

use nalgebra::RealField;

/// Real floating-point scalar (`f32` or `f64`).
pub trait Real: RealField + Copy + Debug + LowerExp + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Lossy conversion to `f64`, used for export and reporting.
    #[inline]
    fn to_f64(self) -> f64 {
        nalgebra::try_convert(self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `sign(x)` with `sign(0) = 0`.
#[inline]
pub(crate) fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}
