//! Exact and entropic Wasserstein-1, and the adversarial losses built on them.

mod adversarial;
mod exact;
mod sinkhorn;

pub use adversarial::{adversarial_loss, w1, AdversarialKind, Candidate};
pub use exact::{wasserstein_exact, Plan, TransportResult};
pub use sinkhorn::{sinkhorn, wasserstein_sinkhorn, SinkhornOutcome, SINKHORN_TOL};
