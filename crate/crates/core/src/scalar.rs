//! Scalar abstraction: every numerical routine in this crate is generic over
//! the floating-point type through this trait.

use std::fmt;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the library computes with (f32 or f64).
pub trait Scalar:
    Float + FromPrimitive + fmt::Debug + fmt::Display + fmt::LowerExp + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + fmt::Debug + fmt::Display + fmt::LowerExp + Send + Sync + 'static
{
}

/// Converts an f64 constant into the working scalar type.
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant must be representable in the scalar type")
}
