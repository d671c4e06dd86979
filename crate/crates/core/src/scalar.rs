//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar type the models, simulator and optimizer are generic over.
///
/// Implemented for `f32` and `f64`. Weights and angles are converted through
/// `f64` at the boundaries (presets, documents, CLI flags).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Absolute-or-relative closeness used by the equivalence checks.
pub(crate) fn close<T: Scalar>(a: T, b: T, rel: T) -> bool {
    let scale = T::one().max(a.abs()).max(b.abs());
    (a - b).abs() <= rel * scale
}

/// Absolute tolerance for route and energy costs, matching three-decimal
/// reporting. The bound is inclusive.
pub const COST_TOLERANCE: f64 = 1e-3;

/// `|a - b| <= COST_TOLERANCE`, with slack for the final rounding of `a - b`.
pub fn cost_matches(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TOLERANCE + 1e-9
}
