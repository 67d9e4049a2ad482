//! Scalar abstraction for the whole library.
//!
//! Every numeric routine is generic over [`Real`], so models can run in
//! `f32` or `f64`. Concrete aliases for the common `f64` instantiation
//! live at the crate root.

use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default {}

impl<T> Real for T where T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default {}

/// Convert an `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Real>(value: f64) -> T {
    T::from_f64(value).expect("constant representable in scalar type")
}
