use thiserror::Error;

use crate::compose::BijectivityWitness;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights have zero total mass")]
    ZeroTotalMass,
    #[error("probabilities sum to {sum}, outside normalization tolerance")]
    NotNormalized { sum: f64 },
    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },
    #[error("invalid symbol space: {0}")]
    InvalidSpace(String),
    #[error("symbol {index} has no image under the map")]
    UnmappedSymbol { index: usize },
    #[error("image of symbol {index} lies outside the target space")]
    ImageOutsideTarget { index: usize },
    #[error("symbol spaces do not match ({0})")]
    SpaceMismatch(String),
    #[error("symbol {0:?} is not in the space")]
    SymbolNotInSpace(Vec<u32>),
    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),
    #[error("composition is not bijective: {0}")]
    NotBijective(BijectivityWitness),
    #[error("invalid composition: {0}")]
    InvalidComposition(String),
    #[error("invalid decomposition map: {0}")]
    InvalidDecomposition(String),
    #[error("invalid scenario parameters: {0}")]
    InvalidParams(String),
    #[error("transport solver failure: {0}")]
    SolverFailure(String),
    #[error("no convergence: marginal violation {violation:e} after {iterations} iterations")]
    NonConvergence { violation: f64, iterations: usize },
    #[error("missing fragment: {0}")]
    MissingFragment(String),
    #[error("objective returned a non-finite value at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("resolving matrix is rank deficient (rank {rank} < {cols})")]
    RankDeficient {
        rank: usize,
        cols: usize,
        report: Box<crate::identify::IdentifiabilityReport>,
    },
    #[error("background law is not invariant under the value involution (max deviation {deviation:e})")]
    SymmetryAbsent { deviation: f64 },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("fragment visibility violation: {0}")]
    FragmentVisibilityViolation(String),
    #[error("task did not converge after {iterations} iterations")]
    TaskNonConvergence {
        iterations: usize,
        outcome: Box<crate::tasks::TaskOutcome>,
    },
    #[error("chain stage schema mismatch: {0}")]
    StageSchemaMismatch(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
