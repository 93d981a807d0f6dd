use std::fmt::{Debug, Display, LowerExp};
use std::ops::{Add, Sub};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive, Zero};

/// Floating-point scalar used by the quadrature and sampling code: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or sample.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real always converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Anything partial sums of a walk can be formed and compared in.
///
/// Floats satisfy it, and so do exact types such as `num_rational::BigRational`.
pub trait WalkScalar: Clone + PartialOrd + Zero + Add<Output = Self> + Sub<Output = Self> + Debug {}

impl<T> WalkScalar for T where T: Clone + PartialOrd + Zero + Add<Output = T> + Sub<Output = T> + Debug {}
