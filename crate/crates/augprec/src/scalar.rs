//! Floating-point scalar abstraction.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Real scalar type the kernels are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + NumAssignOps + FromPrimitive + ToPrimitive + Sum + Debug + Display + LowerExp + 'static
{
    /// Lossless, shortest round-trip decimal rendering (used by the
    /// Matrix Market writer so that write/read is bit-exact).
    fn format_exact(&self) -> String {
        format!("{}", self)
    }
}

impl<T> Scalar for T where
    T: Float
        + NumAssignOps
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + LowerExp
        + 'static
{
}

/// Shorthand for converting small constants into `T`.
pub(crate) fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}
