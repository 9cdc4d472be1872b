//! Scalar abstraction for the numeric pipeline.
//!
//! All distance and clustering math is generic over [`Real`], so the same
//! code runs on `f32` or `f64`. Concrete aliases live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable as a session-vector weight or a distance.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + AddAssign + SubAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion for reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("representable scalar")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("representable scalar")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}
