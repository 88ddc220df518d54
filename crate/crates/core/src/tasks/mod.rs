//! The four learning tasks, their combined loss, and chain learning.

mod chain;
mod config;
mod learn;
mod solution;
mod solve;

pub use chain::{builtin_chain, chain_learn, ChainFamily, ChainReport, ChainSeed, ChainSpec, ChainStage, StageResult};
pub use config::{SolverKind, TaskConfig};
pub use solution::{total_loss, Fragment, LossBreakdown, Provenance, Solution};
pub use solve::{solve_task, solve_task_with_truth, LawComparison, TaskOutcome, TaskReport};
