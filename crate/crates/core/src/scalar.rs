//! Scalar abstraction for the signal path.
//!
//! Everything that touches per-frame data is generic over [`Real`] so the
//! same code runs in `f32` and `f64`. Setup-time spectral work (DPS and
//! covariance eigendecompositions) always runs in `f64` and is cast down.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64` (constants, setup-time results).
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex sample over a [`Real`] scalar.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cast_c<T: Real>(z: Complex<f64>) -> C<T> {
    C::new(T::lit(z.re), T::lit(z.im))
}
