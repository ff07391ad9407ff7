//! Scalar abstraction: the whole math core runs on any IEEE float.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the core.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Shorthand for lossy conversion from `f64` literals.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 -> scalar conversion")
    }

    /// Tolerance used by structural validation (row sums, simplex checks).
    /// `1e-12` for `f64`, scaled up for narrower types.
    fn validation_tol() -> Self {
        let base = Self::c(1e-12);
        let eps_scaled = Self::epsilon() * Self::c(100.0);
        if eps_scaled > base {
            eps_scaled
        } else {
            base
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}
