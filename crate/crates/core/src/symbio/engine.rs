use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    assemble, detect_dependency, distribute_fitness, evaluate_network, evolve_generation, rank_by_score,
    record_cooccurrence, FitnessLedger, Network, NeuronGene, SymbioError,
};
use crate::config::RunConfig;
use crate::envs::EnvSpec;
use crate::hyperstruct::{StructureId, Universe};
use crate::population::{goal_reached, init_population, Population, PopulationError, StallDetector};
use crate::rng::{substream, Phase};

/// Standard deviation of initial weights.
pub const INIT_SCALE: f64 = 1.0;

/// Loop state that is not part of the structures themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub detector: StallDetector,
    pub reverse_streaks: BTreeMap<StructureId, u32>,
}

/// What happened in one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub generation: u64,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub pop_order: u32,
    pub roster_size: usize,
    pub breaks_so_far: usize,
    pub solved: bool,
    pub stalled: bool,
    pub broke: Option<StructureId>,
    pub reversed: Option<StructureId>,
}

/// Complete evolutionary state; `generation` is the next one to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbiosis {
    pub universe: Universe<NeuronGene>,
    pub population: Population,
    pub ledger: FitnessLedger,
    pub state: RunState,
    pub generation: u64,
}

impl Symbiosis {
    pub fn initialize(config: &RunConfig, env: &EnvSpec) -> Result<Self, SymbioError> {
        let evo = &config.evolution;
        let mut rng = substream(evo.seed, Phase::Init, 0, 0);
        let genomes = (0..config.roster_size as u32)
            .map(|i| NeuronGene::random(&mut rng, i, env.input_dim, env.output_dim, INIT_SCALE, evo.w_max))
            .collect();
        let mut universe = Universe::with_max_order(config.max_order);
        let population = init_population(&mut universe, &config.problem, genomes, config.population_limit)?;
        Ok(Self {
            universe,
            population,
            ledger: FitnessLedger::new(evo.top_m),
            state: RunState { detector: StallDetector::new(evo.window_g, evo.min_improvement), reverse_streaks: BTreeMap::new() },
            generation: 0,
        })
    }

    /// Assemble, evaluate, credit, then (unless solved) break, reverse and
    /// evolve.
    pub fn step(&mut self, config: &RunConfig, env: &EnvSpec) -> Result<GenerationOutcome, SymbioError> {
        let evo = &config.evolution;
        let generation = self.generation;
        let mut rng = substream(evo.seed, Phase::Assemble, generation, 0);
        let mut assemblies = assemble(&self.universe, &self.population, evo, &mut rng)?;

        let universe = &self.universe;
        let episodes = env.cycle_len();
        let results: Vec<_> = assemblies
            .par_iter()
            .map(|a| {
                let network = Network::from_assembly(universe, a, env.input_dim, env.output_dim)?;
                evaluate_network(&network, env, episodes)
            })
            .collect();
        for (assembly, result) in assemblies.iter_mut().zip(results) {
            let eval = result?;
            assembly.fitness = Some(eval.fitness);
            assembly.solved = eval.solved;
        }

        distribute_fitness(&mut self.ledger, &assemblies)?;
        record_cooccurrence(&mut self.ledger, &self.universe, &self.population, &assemblies)?;

        let fitnesses: Vec<f64> = assemblies.iter().map(|a| a.fitness.expect("evaluated")).collect();
        let best_fitness = fitnesses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean_fitness = fitnesses.iter().sum::<f64>() / fitnesses.len() as f64;
        self.state.detector.record(best_fitness);

        let env_solved = assemblies.iter().any(|a| a.solved);
        let solved = goal_reached(&config.problem, &self.population, env_solved);
        let stalled = self.state.detector.stalled();
        let mut broke = None;
        let mut reversed = None;

        if !solved {
            if config.breaks_enabled && stalled {
                broke = self.try_break(config, generation)?;
            }
            if config.reverse_enabled {
                reversed = self.try_reverse(config, generation)?;
            }
            let mut rng = substream(evo.seed, Phase::Evolve, generation, 0);
            evolve_generation(&mut self.universe, &mut self.population, &mut self.ledger, evo, &mut rng, generation)?;
        }

        self.generation += 1;
        Ok(GenerationOutcome {
            generation,
            best_fitness,
            mean_fitness,
            pop_order: self.population.pop_order_n,
            roster_size: self.population.members.len(),
            breaks_so_far: self.population.break_log.len(),
            solved,
            stalled,
            broke,
            reversed,
        })
    }

    fn try_break(&mut self, config: &RunConfig, generation: u64) -> Result<Option<StructureId>, SymbioError> {
        let pairs = detect_dependency(&self.ledger, &self.universe, &self.population, &config.evolution);
        let level = self.population.pop_order_n;
        for &(x, y) in &pairs {
            self.ledger.evidence.record(x, y, level);
        }
        let Some((x, y)) = self.population.can_break(&self.universe, &self.ledger.evidence, &pairs) else {
            return Ok(None);
        };
        let composite = self.population.apply_break(&mut self.universe, &self.ledger.evidence, x, y, generation)?;
        self.state.detector.clear();
        Ok(Some(composite))
    }

    /// Dissolves the lowest-id composite that has sat in the bottom quartile of
    /// its stratum for `window_G` consecutive generations.
    fn try_reverse(&mut self, config: &RunConfig, generation: u64) -> Result<Option<StructureId>, SymbioError> {
        let strata = self.population.strata(&self.universe)?;
        let mut bottom = BTreeSet::new();
        for members in strata.values() {
            let ranked = rank_by_score(&self.ledger, members);
            let quarter = ranked.len() / 4;
            bottom.extend(ranked[ranked.len() - quarter..].iter().copied());
        }
        let composites: Vec<StructureId> = self.population.origins.keys().copied().collect();
        let streaks = &mut self.state.reverse_streaks;
        streaks.retain(|id, _| composites.contains(id));
        for &c in &composites {
            if bottom.contains(&c) {
                *streaks.entry(c).or_default() += 1;
            } else {
                streaks.remove(&c);
            }
        }
        let window = config.evolution.window_g as u32;
        let Some(victim) = streaks.iter().find(|(_, &n)| n >= window).map(|(&id, _)| id) else {
            return Ok(None);
        };
        match self.population.apply_reverse_break(&self.universe, victim, generation) {
            Ok(()) => {
                self.state.reverse_streaks.remove(&victim);
                self.state.detector.clear();
                Ok(Some(victim))
            }
            Err(PopulationError::LimitExceeded { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}
