//! Scalar abstraction shared by the solver, the network model and the market builders.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the whole crate is generic over.
///
/// The tolerances are tied to the precision of the type: the simplex uses
/// [`Scalar::pivot_tolerance`] to reject near-zero pivots and
/// [`Scalar::feasibility_tolerance`] for bound and optimality tests.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    fn pivot_tolerance() -> Self;

    fn feasibility_tolerance() -> Self;

    /// Converts an `f64` literal. Panics only if the target type cannot represent it at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    #[inline]
    fn pivot_tolerance() -> Self {
        1e-9
    }

    #[inline]
    fn feasibility_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    #[inline]
    fn pivot_tolerance() -> Self {
        1e-6
    }

    #[inline]
    fn feasibility_tolerance() -> Self {
        1e-5
    }
}

/// Converts between two scalar types, mapping infinities through unchanged.
#[inline]
pub fn cast<A: Scalar, B: Scalar>(x: A) -> B {
    B::lit(x.as_f64())
}
