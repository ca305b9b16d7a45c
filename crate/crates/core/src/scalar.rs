//! Scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the model can be evaluated in: `f32` or `f64`.
///
/// On top of `num_traits::Float` this adds the complementary error function,
/// which the normal tail kernels are built on.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Complementary error function `1 - erf(x)`, accurate in the right tail.
    fn erfc(self) -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    /// Widening conversion used for error payloads and reports.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_matches_between_widths() {
        for &x in &[-2.0f64, -0.3, 0.0, 0.7, 1.9, 3.5] {
            let wide = Real::erfc(x);
            let narrow = Real::erfc(x as f32) as f64;
            assert!((wide - narrow).abs() < 1e-6, "x={x}");
        }
        assert_eq!(Real::erfc(0.0f64), 1.0);
    }
}
