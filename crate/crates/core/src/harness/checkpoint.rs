use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::config::RunConfig;
use crate::hyperstruct::Universe;
use crate::population::Population;
use crate::rng;
use crate::symbio::{FitnessLedger, NeuronGene, RunState, Symbiosis};

pub const CHECKPOINT_FORMAT: &str = "sosage-checkpoint/1";

/// Full snapshot of a run between two generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    /// Next generation to run.
    pub generation: u64,
    pub config_digest: String,
    pub config: RunConfig,
    pub rng_state: String,
    pub solved: bool,
    pub generations_to_solve: Option<u64>,
    pub universe: Universe<NeuronGene>,
    pub population: Population,
    pub ledger: FitnessLedger,
    pub run_state: RunState,
}

impl Checkpoint {
    pub fn capture(config: &RunConfig, state: &Symbiosis, generations_to_solve: Option<u64>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            generation: state.generation,
            config_digest: config.digest(),
            config: config.clone(),
            rng_state: rng::state_hex(config.evolution.seed, state.generation),
            solved: generations_to_solve.is_some(),
            generations_to_solve,
            universe: state.universe.clone(),
            population: state.population.clone(),
            ledger: state.ledger.clone(),
            run_state: state.state.clone(),
        }
    }

    /// SHA-256 of the snapshot with the output directory blanked, so runs
    /// written to different places compare equal.
    pub fn content_digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.config.output_dir = Default::default();
        let text = serde_json::to_string(&canonical).expect("checkpoint serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn restore(&self) -> Result<Symbiosis, HarnessError> {
        let (seed, generation) = rng::parse_state_hex(&self.rng_state)
            .ok_or_else(|| HarnessError::Malformed(format!("rng_state {:?} is not 16 hex bytes", self.rng_state)))?;
        if seed != self.config.evolution.seed || generation != self.generation {
            return Err(HarnessError::Malformed("rng_state disagrees with config seed or generation".into()));
        }
        let mut universe = self.universe.clone();
        universe.set_max_order(self.config.max_order);
        Ok(Symbiosis {
            universe,
            population: self.population.clone(),
            ledger: self.ledger.clone(),
            state: self.run_state.clone(),
            generation: self.generation,
        })
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(checkpoint).map_err(|e| HarnessError::Malformed(e.to_string()))?;
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Reads a checkpoint without digest checks.
pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::parse(path, &e))
}

/// Reads a checkpoint and checks its embedded config (and `expected`, when
/// given) against the recorded digest.
pub fn load_checkpoint(path: &Path, expected: Option<&RunConfig>) -> Result<Checkpoint, HarnessError> {
    let checkpoint = read_checkpoint(path)?;
    let found = checkpoint.config.digest();
    if found != checkpoint.config_digest {
        return Err(HarnessError::DigestMismatch { expected: checkpoint.config_digest.clone(), found });
    }
    if let Some(config) = expected {
        let found = config.digest();
        if found != checkpoint.config_digest {
            return Err(HarnessError::DigestMismatch { expected: checkpoint.config_digest.clone(), found });
        }
    }
    Ok(checkpoint)
}
