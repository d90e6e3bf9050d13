//! Scalar abstraction for the numeric core.
//!
//! Everything in the math layers (linear algebra, QP solver, barrier
//! chains, dynamics, scenario row builders, tuner) is generic over a
//! floating-point scalar so the same code runs in `f32` or `f64`.
//! Simulation I/O (configs, CSV export) is pinned to `f64` via the
//! [`crate::Real`] alias.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the toolkit is generic over.
///
/// Implemented for `f32` and `f64`. The bound collects what the numeric
/// code actually needs: IEEE float semantics, conversions from literal
/// constants, and printable debug output.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    ///
    /// Panics if the value is not representable, which cannot happen for
    /// the finite literals used throughout this crate.
    fn real(value: f64) -> Self {
        Self::from_f64(value).expect("literal not representable in scalar type")
    }

    /// Converts this scalar to `f64` for reporting and serialization.
    fn to_real(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Free-function shorthand for [`Scalar::real`]; keeps numeric
/// expressions readable when sprinkling literal constants into generic
/// code.
#[inline]
pub fn real<S: Scalar>(value: f64) -> S {
    S::real(value)
}
