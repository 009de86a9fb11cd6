//! Scalar abstraction for the math modules.
//!
//! Everything numerical in this crate is generic over [`Real`], which is any
//! scalar nalgebra can factorize (`RealField`) that is also cheap to copy and
//! convertible from literal constants. In practice that means `f32` and `f64`;
//! the crate root exports `f64` aliases for the common types.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the simulator works over.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T: RealField + Copy + FromPrimitive + ToPrimitive> Real for T {}

/// Converts an `f64` literal into the working scalar.
///
/// Panics only if the literal is not representable at all, which cannot happen
/// for the finite constants used in this crate.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite literal")
}
