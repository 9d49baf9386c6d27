use std::iter::Sum;

use ndarray::NdFloat;
use num_traits::FromPrimitive;

/// Floating point scalar the numeric core is written against: `f32` or `f64`.
pub trait Scalar: NdFloat + FromPrimitive + Sum + Default {
    /// Converts an `f64` literal. Every value used in the crate is
    /// representable (possibly rounded) in both implementors.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal converts to scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar converts to f64")
    }

    #[inline]
    fn of_count(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
