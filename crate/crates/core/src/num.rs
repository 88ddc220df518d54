//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the distribution, transport and simplex kernels are
/// generic over. Implemented for `f32` and `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance for "sums to one" checks on probability vectors.
    fn normalization_tol() -> Self;

    /// Tolerance for comparing exact quantities that went through a few
    /// dozen floating point operations (metric axioms, feasibility).
    fn feasibility_tol() -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f64 {
    fn normalization_tol() -> Self {
        1e-12
    }
    fn feasibility_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn normalization_tol() -> Self {
        1e-5
    }
    fn feasibility_tol() -> Self {
        1e-4
    }
}

/// Sum in index order. Every reduction that ends up in a serialized artifact
/// goes through here so the summation order is fixed.
pub fn ordered_sum<T: Real>(xs: impl IntoIterator<Item = T>) -> T {
    let mut acc = T::zero();
    for x in xs {
        acc += x;
    }
    acc
}
