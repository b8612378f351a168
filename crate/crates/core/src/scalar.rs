//! Scalar abstraction: the crate's numerics run on any float satisfying
//! [`Scalar`], concretely `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + rustfft::FftNum
{
    /// Lossless-enough conversion from an `f64` constant.
    fn from_f64c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    /// Conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// 2π.
    fn two_pi() -> Self {
        Self::PI() + Self::PI()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
