//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use nalgebra as na;
use num_traits as nt;

pub use na::Complex;

/// Real floating point type the whole pipeline is generic over (f32 or f64).
pub trait Real:
    na::RealField
    + Copy
    + nt::FloatConst
    + nt::FromPrimitive
    + nt::ToPrimitive
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; every `Real` can represent one approximately.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as nt::ToPrimitive>::to_f64(&self).expect("finite conversion to f64")
    }

    #[inline]
    fn count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for the complex scalar over `T`.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}
