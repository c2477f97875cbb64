//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point type the network, objectives and metrics are generic over.
///
/// Implemented for `f32` and `f64`. Gradient-check tolerances in this crate
/// assume `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Floor applied to every logarithm argument.
pub const LOG_FLOOR: f64 = 1e-12;

/// `ln(max(x, LOG_FLOOR))`.
#[inline]
pub fn clamped_ln<T: Scalar>(x: T) -> T {
    x.max(T::lit(LOG_FLOOR)).ln()
}

/// Derivative of [`clamped_ln`]; zero inside the clamped region.
#[inline]
pub fn clamped_ln_deriv<T: Scalar>(x: T) -> T {
    if x > T::lit(LOG_FLOOR) {
        x.recip()
    } else {
        T::zero()
    }
}
