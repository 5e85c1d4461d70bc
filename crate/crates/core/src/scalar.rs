//! Floating-point abstraction: all numerics are generic over [`Scalar`],
//! with `f32` and `f64` as the two concrete instantiations.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Scalar type the whole pipeline is generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Display
    + Debug
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Conversion from an `f64` literal. Panics only if the target type
    /// cannot represent any finite `f64`, which neither `f32` nor `f64` hits.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize not representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Clamp to `[-1, 1]` before an `acos`; ellipsoid parametrizations produce
/// cosines a few ulp outside the interval.
pub fn clamped_acos<S: Scalar>(c: S) -> S {
    c.max(-S::one()).min(S::one()).acos()
}
