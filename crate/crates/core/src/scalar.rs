//! Scalar abstraction shared by the geometry, catalog and feature code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the geometric core is generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the type cannot represent it at all.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("scalar literal out of range")
    }

    /// Converts a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count out of scalar range")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    /// Absolute tolerance used by point-on-boundary tests, in millimeters.
    fn geom_eps() -> Self;
}

impl Scalar for f64 {
    fn geom_eps() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn geom_eps() -> Self {
        1e-5
    }
}
