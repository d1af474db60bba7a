//! Symbiotic neuro-evolution on top of the breaking population.
//!
//! Order-1 structures carry single hidden neurons. Each generation samples
//! complete networks from the roster, evaluates them on an environment and
//! hands the network fitness back to the participating units. Co-occurrence
//! statistics supply the dependency evidence that drives breaking, and
//! evolution runs separately inside each order stratum.

mod engine;
mod evolve;
mod genome;
mod ledger;
mod network;

use thiserror::Error;

pub use crate::config::EvolutionConfig;
pub use engine::{GenerationOutcome, RunState, Symbiosis, INIT_SCALE};
pub use evolve::{elite_count, evolve_generation, rank_by_score};
pub use genome::{format_weight, Activation, NeuronGene};
pub use ledger::{
    detect_dependency, distribute_fitness, record_cooccurrence, top_m_mean, CoTally, FitnessLedger, LineageRecord,
    MemberRecord, SAMPLE_CAP,
};
pub use network::{assemble, evaluate, evaluate_network, Assembly, Evaluation, Network};

use crate::envs::EnvError;
use crate::hyperstruct::{HyperError, StructureId};
use crate::population::PopulationError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbioError {
    #[error("roster of {roster} cannot fill networks of {network_size}")]
    RosterTooSmall { roster: usize, network_size: usize },
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("assembly {0} has no fitness")]
    UnevaluatedAssembly(usize),
    #[error("no roster member has a score")]
    NoScores,
    #[error("primitive {0} carries no genome")]
    MissingPayload(StructureId),
    #[error(transparent)]
    Hyper(#[from] HyperError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
