//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All algorithms are written against [`Real`], which is satisfied by `f32`
//! and `f64`. The crate root exposes `f64` aliases for the common case.

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Real floating-point scalar usable by the graph, control, simulation and
/// analysis routines.
pub trait Real: RealField + Copy + ToPrimitive {}

impl<T> Real for T where T: RealField + Copy + ToPrimitive {}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Lossy conversion back to `f64`, used for reporting and error payloads.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}
