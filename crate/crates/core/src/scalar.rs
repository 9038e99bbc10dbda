//! Floating-point abstraction used by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the models and metrics are generic over.
///
/// Blanket-implemented for `f32` and `f64`. Tolerances quoted throughout the
/// crate (column sums within `1e-9`, etc.) assume `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + Sum
    + for<'a> Sum<&'a Self>
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Widens to `f64` for reporting.
    #[inline]
    fn widen(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Converts a count.
    #[inline]
    fn count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + ScalarOperand
        + Sum
        + for<'a> Sum<&'a T>
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Floor substituted for `ln(0)` in likelihood sums.
pub const LOG_FLOOR: f64 = 1e-30;

/// Floor added to zero probabilities in divergence computations.
pub const DIVERGENCE_FLOOR: f64 = 1e-12;
