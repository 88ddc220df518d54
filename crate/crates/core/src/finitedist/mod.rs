//! Finite symbol spaces, distributions over them, and ground metrics.

mod distribution;
mod metric;
mod space;

pub use distribution::{
    embed_on_union, product, pushforward, pushforward_symbols, tv_distance, tv_distance_by_symbol, FiniteDistribution,
};
pub use metric::{cross_metric, ground_metric, symbol_distance, CostKind, CostMatrix, MetricKind};
pub use space::{same_space, SpaceRef, Symbol, SymbolSpace};

pub(crate) use space::{ensure_same, format_symbol};

/// Convenience: `new_distribution` under its operational name.
pub fn new_distribution<T: crate::num::Real>(
    space: SpaceRef,
    weights: Vec<T>,
) -> crate::error::Result<FiniteDistribution<T>> {
    FiniteDistribution::new(space, weights)
}
