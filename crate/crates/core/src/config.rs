//! Run configuration shared by the evolutionary engine and the harness.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::envs::{EnvConfig, EnvError, EnvName, EnvSpec};
use crate::population::ProblemSpec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{field}: {rule}")]
pub struct ValidationError {
    pub field: String,
    pub rule: String,
}

impl ValidationError {
    fn new(field: &str, rule: impl Into<String>) -> Self {
        Self { field: field.to_string(), rule: rule.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub network_size: usize,
    pub assemblies_per_generation: usize,
    pub elite_fraction: f64,
    pub mutation_rate: f64,
    pub mutation_sigma: f64,
    pub crossover_rate: f64,
    pub top_m: usize,
    pub dependency_delta: f64,
    pub min_cooccur_samples: u64,
    #[serde(rename = "window_G")]
    pub window_g: usize,
    pub min_improvement: f64,
    pub max_generations: u64,
    pub seed: u64,
    pub w_max: f64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            network_size: 3,
            assemblies_per_generation: 40,
            elite_fraction: 0.25,
            mutation_rate: 0.3,
            mutation_sigma: 0.5,
            crossover_rate: 0.5,
            top_m: 3,
            dependency_delta: 0.25,
            min_cooccur_samples: 5,
            window_g: 10,
            min_improvement: 0.01,
            max_generations: 300,
            seed: 0,
            w_max: 5.0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.network_size == 0 {
            return Err(ValidationError::new("evolution.network_size", "must be at least 1"));
        }
        if self.assemblies_per_generation == 0 {
            return Err(ValidationError::new("evolution.assemblies_per_generation", "must be at least 1"));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(ValidationError::new("evolution.elite_fraction", "must lie strictly between 0 and 1"));
        }
        if !unit(self.mutation_rate) {
            return Err(ValidationError::new("evolution.mutation_rate", "must lie in [0, 1]"));
        }
        if !(self.mutation_sigma > 0.0 && self.mutation_sigma.is_finite()) {
            return Err(ValidationError::new("evolution.mutation_sigma", "must be positive"));
        }
        if !unit(self.crossover_rate) {
            return Err(ValidationError::new("evolution.crossover_rate", "must lie in [0, 1]"));
        }
        if self.top_m == 0 {
            return Err(ValidationError::new("evolution.top_m", "must be at least 1"));
        }
        if !(self.dependency_delta > 0.0 && self.dependency_delta.is_finite()) {
            return Err(ValidationError::new("evolution.dependency_delta", "must be positive"));
        }
        if self.min_cooccur_samples == 0 {
            return Err(ValidationError::new("evolution.min_cooccur_samples", "must be at least 1"));
        }
        if self.window_g == 0 {
            return Err(ValidationError::new("evolution.window_G", "must be at least 1"));
        }
        if !(self.min_improvement >= 0.0 && self.min_improvement.is_finite()) {
            return Err(ValidationError::new("evolution.min_improvement", "must be non-negative"));
        }
        if !(self.w_max > 0.0 && self.w_max.is_finite()) {
            return Err(ValidationError::new("evolution.w_max", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub env: EnvConfig,
    pub evolution: EvolutionConfig,
    pub roster_size: usize,
    pub population_limit: usize,
    pub max_order: u32,
    pub breaks_enabled: bool,
    pub reverse_enabled: bool,
    pub output_dir: PathBuf,
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::default(),
            env: EnvConfig::new(EnvName::Xor),
            evolution: EvolutionConfig::default(),
            roster_size: 24,
            population_limit: 32,
            max_order: crate::hyperstruct::DEFAULT_MAX_ORDER,
            breaks_enabled: true,
            reverse_enabled: true,
            output_dir: PathBuf::from("runs"),
            checkpoint_every: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<EnvSpec, ValidationError> {
        self.evolution.validate()?;
        if self.problem.problem_order_x == 0 {
            return Err(ValidationError::new("problem.problem_order_x", "must be at least 1"));
        }
        if self.problem.base_solver_order_r == 0 {
            return Err(ValidationError::new("problem.base_solver_order_r", "must be at least 1"));
        }
        if self.max_order == 0 || self.problem.base_solver_order_r > self.max_order {
            return Err(ValidationError::new("max_order", "must be at least the base solver order"));
        }
        if self.population_limit == 0 {
            return Err(ValidationError::new("population_limit", "must be at least 1"));
        }
        if self.roster_size == 0 || self.roster_size > self.population_limit {
            return Err(ValidationError::new("roster_size", "must lie in 1..=population_limit"));
        }
        if self.evolution.network_size > self.population_limit {
            return Err(ValidationError::new("evolution.network_size", "must not exceed population_limit"));
        }
        if self.evolution.network_size > self.roster_size {
            return Err(ValidationError::new("evolution.network_size", "must not exceed roster_size"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(ValidationError::new("output_dir", "must not be empty"));
        }
        EnvSpec::from_config(&self.env).map_err(|e| match e {
            EnvError::UnknownParam(name) => ValidationError::new(&format!("env.params.{name}"), "unknown parameter"),
            EnvError::InvalidParam { name, reason } => ValidationError::new(&format!("env.params.{name}"), reason),
            other => ValidationError::new("env", other.to_string()),
        })
    }

    /// SHA-256 over the canonical JSON of the config, ignoring where outputs
    /// are written.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let text = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
