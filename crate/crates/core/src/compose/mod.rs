//! Composition rules, decomposition maps, cycle losses and scenario families.

mod cycle;
mod glyphs;
mod maps;
mod scenario;
mod spec;

pub use cycle::{cycle_losses, cycle_losses_map, CycleCosts, CycleLosses};
pub use glyphs::{micro_bb_class, micro_mb_family, GlyphFamily};
pub use maps::{invert_composition, CompositionMap, DecompositionKind, DecompositionMap, StochasticComposition};
pub use scenario::{
    make_scenario, random_table, random_weights, Component, Scenario, ScenarioKind, ScenarioParams, CONSISTENCY_TOL,
    SCHEMA_VERSION,
};
pub use spec::{check_bijective, BijectivityCheck, BijectivityWitness, CompositionSpec, Rule};


/// Symbol-level evaluation of a composition.
pub fn evaluate_composition(
    spec: &CompositionSpec,
    x: &[u32],
    y: &[u32],
) -> crate::error::Result<crate::finitedist::Symbol> {
    spec.evaluate(x, y)
}
