//! Exact finite-domain lab for composition/decomposition generative models.
//!
//! Everything is a distribution over a finite symbol space. Adversarial
//! losses are exact Wasserstein-1 distances, cycle losses are exact
//! expectations, and learning happens by mirror descent over simplices.

pub mod compose;
pub mod error;
pub mod finitedist;
pub mod identify;
pub mod num;
pub mod simplex;
pub mod tasks;
pub mod transport;

pub use error::{LabError, Result};
pub use num::Real;

/// Double-precision distribution, the type every solver works in.
pub type Dist = finitedist::FiniteDistribution<f64>;
/// Single-precision distribution for the generic kernels.
pub type Dist32 = finitedist::FiniteDistribution<f32>;
pub type Costs = finitedist::CostMatrix<f64>;
pub type Transport = transport::TransportResult<f64>;
