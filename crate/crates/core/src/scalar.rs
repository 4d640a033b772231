//! Scalar abstraction shared by the geometric and numeric modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the geometry, clearance, simulation and monitor code
/// is written against. Implemented for `f32` and `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Nearest-integer grid cell for a real pixel coordinate (halves round up).
    #[inline]
    fn to_cell(self) -> Option<i64> {
        let c = (self + Self::lit(0.5)).floor();
        if c.is_finite() {
            c.to_i64()
        } else {
            None
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}
