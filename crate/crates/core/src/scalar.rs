//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating point type the engine can run on.
///
/// Implemented for `f32` and `f64`. The reconstruction defaults to `f64`;
/// `f32` exists mostly so the score network and quick experiments can run
/// at reduced precision.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Sum + Display + Debug
{
    /// Converts an `f64` literal. Infallible for both supported types.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::lit(v as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
