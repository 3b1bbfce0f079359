//! Floating point abstraction shared by the analytical parts of the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance used for normalization checks: 1e-12 in `f64`, a few ulps
    /// above machine precision for narrower types.
    fn norm_tolerance() -> Self {
        let floor = Self::from_f64(1e-12).unwrap();
        let ulps = Self::epsilon() * Self::from_f64(64.0).unwrap();
        floor.max(ulps)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}
