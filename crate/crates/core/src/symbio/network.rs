use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EvolutionConfig, NeuronGene, SymbioError};
use crate::envs::EnvSpec;
use crate::hyperstruct::{StructureId, Universe};
use crate::population::Population;

/// A complete network sampled from the roster: `participants` are the sampled
/// roster units, `wiring` the deduplicated order-1 neurons they flatten to,
/// which form the hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assembly {
    pub participants: Vec<StructureId>,
    pub wiring: Vec<StructureId>,
    pub fitness: Option<f64>,
    #[serde(default)]
    pub solved: bool,
}

impl Assembly {
    pub fn new<P>(universe: &Universe<P>, participants: Vec<StructureId>) -> Result<Self, SymbioError> {
        let mut wiring: Vec<StructureId> = Vec::new();
        for &p in &participants {
            for prim in universe.primitives_of(p)? {
                if !wiring.contains(&prim) {
                    wiring.push(prim);
                }
            }
        }
        Ok(Self { participants, wiring, fitness: None, solved: false })
    }

    pub fn contains(&self, id: StructureId) -> bool {
        self.participants.contains(&id)
    }
}

/// Samples `assemblies_per_generation` networks, each from `network_size`
/// distinct roster units drawn uniformly.
pub fn assemble<P, R: Rng + ?Sized>(
    universe: &Universe<P>,
    pop: &Population,
    config: &EvolutionConfig,
    rng: &mut R,
) -> Result<Vec<Assembly>, SymbioError> {
    let roster = pop.members.len();
    if roster < config.network_size {
        return Err(SymbioError::RosterTooSmall { roster, network_size: config.network_size });
    }
    (0..config.assemblies_per_generation)
        .map(|_| {
            let picks = sample(rng, roster, config.network_size);
            Assembly::new(universe, picks.iter().map(|i| pop.members[i]).collect())
        })
        .collect()
}

/// Single-hidden-layer feed-forward network over borrowed neuron genes.
pub struct Network<'a> {
    hidden: Vec<&'a NeuronGene>,
    output_dim: usize,
}

impl<'a> Network<'a> {
    pub fn new(hidden: Vec<&'a NeuronGene>, input_dim: usize, output_dim: usize) -> Result<Self, SymbioError> {
        for gene in &hidden {
            if gene.in_weights.len() != input_dim + 1 {
                return Err(SymbioError::DimensionMismatch {
                    what: "neuron input weights",
                    expected: input_dim + 1,
                    got: gene.in_weights.len(),
                });
            }
            if let Some(&(slot, _)) = gene.out_targets.iter().find(|(slot, _)| *slot as usize >= output_dim) {
                return Err(SymbioError::DimensionMismatch {
                    what: "neuron output slot",
                    expected: output_dim,
                    got: slot as usize + 1,
                });
            }
        }
        Ok(Self { hidden, output_dim })
    }

    pub fn from_assembly(
        universe: &'a Universe<NeuronGene>,
        assembly: &Assembly,
        input_dim: usize,
        output_dim: usize,
    ) -> Result<Self, SymbioError> {
        let hidden = assembly
            .wiring
            .iter()
            .map(|&id| universe.get(id)?.payload.as_ref().ok_or(SymbioError::MissingPayload(id)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(hidden, input_dim, output_dim)
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim];
        for gene in &self.hidden {
            let (bias, weights) = gene.in_weights.split_last().expect("bias weight");
            let net: f64 = weights.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + bias;
            let h = gene.activation.apply(net);
            for &(slot, w) in &gene.out_targets {
                out[slot as usize] += w * h;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    pub solved: bool,
}

/// Runs `episodes` episodes (start states cycled by index) and returns the
/// mean return per full cycle of start states, so one xor cycle scores out of
/// 4.0. `solved` requires every episode to succeed.
pub fn evaluate_network(network: &Network<'_>, env: &EnvSpec, episodes: usize) -> Result<Evaluation, SymbioError> {
    if episodes == 0 {
        return Ok(Evaluation { fitness: 0.0, solved: false });
    }
    let mut total = 0.0;
    let mut solved = true;
    for i in 0..episodes {
        let episode = env.run_episode(i, |obs| env.decode_action(&network.forward(obs)))?;
        total += episode.return_value;
        solved &= env.episode_solved(&episode);
    }
    Ok(Evaluation { fitness: total * env.cycle_len() as f64 / episodes as f64, solved })
}

/// Evaluates an assembly and records its fitness.
pub fn evaluate(
    universe: &Universe<NeuronGene>,
    assembly: &mut Assembly,
    env: &EnvSpec,
    episodes: usize,
) -> Result<f64, SymbioError> {
    let network = Network::from_assembly(universe, assembly, env.input_dim, env.output_dim)?;
    let eval = evaluate_network(&network, env, episodes)?;
    assembly.fitness = Some(eval.fitness);
    assembly.solved = eval.solved;
    Ok(eval.fitness)
}
