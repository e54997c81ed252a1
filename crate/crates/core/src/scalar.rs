//! Scalar bounds shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating-point scalar: `f32` or `f64`.
///
/// The fast solvers only need `num-traits` arithmetic and an FFT. The dense
/// oracles additionally require [`nalgebra::RealField`], which is added as a
/// separate bound where it is needed.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    /// Lossy conversion from an index or count.
    #[inline]
    fn of_usize(x: usize) -> Self {
        <Self as FromPrimitive>::from_usize(x).expect("usize is representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
