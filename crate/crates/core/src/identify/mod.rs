//! Resolving matrices, rank tests, closed-form recovery of a hidden
//! component, theorem checkers and non-identifiability constructions.

mod counterexample;
mod recovery;
mod resolving;
mod verify;

pub use counterexample::{phase_flip_counterexample, trivial_solution_counterexample, PhaseFlipReport, TrivialReport, SYMMETRY_TOL};
pub use recovery::{recover_component_closed_form, IdentifiabilityReport};
pub use resolving::{column_rank, resolving_matrix, ResolvingMatrix, RANK_REL_TOL};
pub use verify::{
    check_lemma_instance, random_bijective_instance, sweep_theorem2, verify_lemma_bijective_rank, verify_theorem1,
    verify_theorem2, LemmaReport, LemmaTrial, SizeBounds, Theorem1Report, Theorem2Report, Theorem2Sweep, THEOREM1_TOL,
};
