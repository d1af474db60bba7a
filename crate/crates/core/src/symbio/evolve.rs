use std::collections::BTreeMap;

use rand::Rng;

use super::{EvolutionConfig, FitnessLedger, LineageRecord, NeuronGene, SymbioError};
use crate::hyperstruct::{StructureId, Universe};
use crate::population::Population;

/// Members sorted best first; unscored members rank last, ties by id.
pub fn rank_by_score(ledger: &FitnessLedger, members: &[StructureId]) -> Vec<StructureId> {
    let mut ranked = members.to_vec();
    ranked.sort_by(|&a, &b| match (ledger.score(a), ledger.score(b)) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    ranked
}

pub fn elite_count(fraction: f64, len: usize) -> usize {
    ((fraction * len as f64).floor() as usize).clamp(1, len.max(1))
}

/// Rebuilds the DAG under `template` with fresh ids, swapping each primitive's
/// payload for the one in `genomes` and mirroring internal ← edges.
fn rebuild(
    universe: &mut Universe<NeuronGene>,
    template: StructureId,
    genomes: &BTreeMap<StructureId, NeuronGene>,
    generation: u64,
) -> Result<StructureId, SymbioError> {
    let mut memo = BTreeMap::new();
    let root = rebuild_node(universe, template, genomes, generation, &mut memo)?;
    let edges: Vec<(StructureId, StructureId, u32)> = universe
        .graph()
        .dependency_edges()
        .filter(|(a, b, _)| memo.contains_key(a) && memo.contains_key(b))
        .flat_map(|(a, b, levels)| levels.iter().map(move |&l| (a, b, l)))
        .collect();
    for (a, b, level) in edges {
        universe.declare_dependency(memo[&a], memo[&b], level)?;
    }
    Ok(root)
}

fn rebuild_node(
    universe: &mut Universe<NeuronGene>,
    id: StructureId,
    genomes: &BTreeMap<StructureId, NeuronGene>,
    generation: u64,
    memo: &mut BTreeMap<StructureId, StructureId>,
) -> Result<StructureId, SymbioError> {
    if let Some(&done) = memo.get(&id) {
        return Ok(done);
    }
    let node = universe.get(id)?.clone();
    let new_id = if node.order == 1 {
        let genome = genomes.get(&id).cloned().ok_or(SymbioError::MissingPayload(id))?;
        universe.add_primitive(genome, format!("g{generation}"))
    } else {
        let mut parts = Vec::with_capacity(node.constituents.len());
        for &c in &node.constituents {
            parts.push(rebuild_node(universe, c, genomes, generation, memo)?);
        }
        universe.construct(parts, format!("g{generation}"))?
    };
    memo.insert(id, new_id);
    Ok(new_id)
}

fn genomes_of(universe: &Universe<NeuronGene>, id: StructureId) -> Result<BTreeMap<StructureId, NeuronGene>, SymbioError> {
    universe
        .primitives_of(id)?
        .into_iter()
        .map(|p| {
            let gene = universe.get(p)?.payload.clone().ok_or(SymbioError::MissingPayload(p))?;
            Ok((p, gene))
        })
        .collect()
}

/// One generation of stratified evolution. Inside every order stratum the
/// elite fraction survives verbatim and the other slots get offspring of
/// elites. Single-genome parents may cross over; multi-genome composites are
/// cloned as units. Every weight is then mutated with probability
/// `mutation_rate`.
pub fn evolve_generation<R: Rng + ?Sized>(
    universe: &mut Universe<NeuronGene>,
    pop: &mut Population,
    ledger: &mut FitnessLedger,
    config: &EvolutionConfig,
    rng: &mut R,
    generation: u64,
) -> Result<(), SymbioError> {
    if pop.members.iter().all(|&m| ledger.score(m).is_none()) {
        return Err(SymbioError::NoScores);
    }
    let strata = pop.strata(universe)?;
    for (order, members) in strata {
        let ranked = rank_by_score(ledger, &members);
        let elites = elite_count(config.elite_fraction, ranked.len());
        for &slot in &ranked[elites..] {
            let a = ranked[rng.random_range(0..elites)];
            let mut genomes = genomes_of(universe, a)?;
            let mut parents = vec![a];
            let wants_cross = rng.random::<f64>() < config.crossover_rate;
            if wants_cross && elites >= 2 && genomes.len() == 1 {
                let mut b = ranked[rng.random_range(0..elites - 1)];
                if b == a {
                    b = ranked[elites - 1];
                }
                let other = genomes_of(universe, b)?;
                if other.len() == 1 {
                    let mate = other.values().next().expect("one genome");
                    for gene in genomes.values_mut() {
                        *gene = gene.crossover(mate, rng);
                    }
                    parents.push(b);
                }
            }
            for gene in genomes.values_mut() {
                gene.mutate(rng, config.mutation_rate, config.mutation_sigma, config.w_max);
            }
            let child = rebuild(universe, a, &genomes, generation)?;
            pop.replace_member(slot, child);
            ledger.lineage.insert(child, LineageRecord { generation, order, parents });
        }
    }
    ledger.retain_members(&pop.members);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{init_population, DependencyEvidence, ProblemSpec};
    use crate::rng::{substream, Phase};
    use crate::symbio::{distribute_fitness, Assembly};

    fn setup(n: usize) -> (Universe<NeuronGene>, Population, FitnessLedger) {
        let mut u = Universe::new();
        let mut rng = substream(5, Phase::Init, 0, 0);
        let genomes = (0..n as u32).map(|i| NeuronGene::random(&mut rng, i, 2, 1, 1.0, 5.0)).collect();
        let pop = init_population(&mut u, &ProblemSpec::default(), genomes, 16).unwrap();
        let mut ledger = FitnessLedger::new(1);
        let assemblies: Vec<Assembly> = pop
            .members
            .iter()
            .enumerate()
            .map(|(i, &m)| Assembly { participants: vec![m], wiring: vec![], fitness: Some(i as f64), solved: false })
            .collect();
        distribute_fitness(&mut ledger, &assemblies).unwrap();
        (u, pop, ledger)
    }

    #[test]
    fn elite_arithmetic() {
        assert_eq!(elite_count(0.25, 8), 2);
        assert_eq!(elite_count(0.25, 1), 1);
        assert_eq!(elite_count(0.3, 10), 3);
    }

    #[test]
    fn elites_survive_verbatim() {
        let (mut u, mut pop, mut ledger) = setup(8);
        let best: Vec<_> = pop.members[6..].to_vec();
        let config = EvolutionConfig { elite_fraction: 0.25, ..EvolutionConfig::default() };
        evolve_generation(&mut u, &mut pop, &mut ledger, &config, &mut substream(5, Phase::Evolve, 0, 0), 0).unwrap();
        assert_eq!(pop.members.len(), 8);
        let kept: Vec<_> = pop.members.iter().filter(|m| best.contains(m)).collect();
        assert_eq!(kept.len(), 2);
        assert!(pop.members.iter().all(|&m| u.structural_order(m).unwrap() == 1));
    }

    #[test]
    fn no_variation_means_clones() {
        let (mut u, mut pop, mut ledger) = setup(8);
        let elite_genes: Vec<NeuronGene> =
            pop.members[6..].iter().map(|&m| u.get(m).unwrap().payload.clone().unwrap()).collect();
        let config = EvolutionConfig { mutation_rate: 0.0, crossover_rate: 0.0, elite_fraction: 0.25, ..EvolutionConfig::default() };
        evolve_generation(&mut u, &mut pop, &mut ledger, &config, &mut substream(5, Phase::Evolve, 0, 0), 0).unwrap();
        for &m in &pop.members {
            let gene = u.get(m).unwrap().payload.clone().unwrap();
            assert!(elite_genes.contains(&gene));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let run = || {
            let (mut u, mut pop, mut ledger) = setup(8);
            let config = EvolutionConfig::default();
            evolve_generation(&mut u, &mut pop, &mut ledger, &config, &mut substream(9, Phase::Evolve, 0, 0), 0).unwrap();
            let genes: Vec<NeuronGene> = pop.members.iter().map(|&m| u.get(m).unwrap().payload.clone().unwrap()).collect();
            serde_json::to_string(&genes).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn no_scores_is_an_error() {
        let (mut u, mut pop, _) = setup(4);
        let mut empty = FitnessLedger::new(1);
        let r = evolve_generation(&mut u, &mut pop, &mut empty, &EvolutionConfig::default(), &mut substream(0, Phase::Evolve, 0, 0), 0);
        assert_eq!(r, Err(SymbioError::NoScores));
    }

    #[test]
    fn composites_evolve_as_units_within_their_stratum() {
        let (mut u, mut pop, mut ledger) = setup(8);
        let (x, y) = (pop.members[0], pop.members[1]);
        let mut evidence = DependencyEvidence::new();
        evidence.record(x, y, 1);
        let z = pop.apply_break(&mut u, &evidence, x, y, 0).unwrap();
        // second composite so the order-2 stratum has a non-elite slot
        let (p, q) = (pop.members[2], pop.members[3]);
        let w = u.construct([p, q], "").unwrap();
        u.declare_dependency(w, p, 2).unwrap();
        pop.members[2] = w;
        pop.origins.insert(w, None);
        let scored = [Assembly { participants: vec![z], wiring: vec![], fitness: Some(10.0), solved: false },
                      Assembly { participants: vec![w], wiring: vec![], fitness: Some(-1.0), solved: false }];
        distribute_fitness(&mut ledger, &scored).unwrap();
        let config = EvolutionConfig { elite_fraction: 0.25, ..EvolutionConfig::default() };
        evolve_generation(&mut u, &mut pop, &mut ledger, &config, &mut substream(1, Phase::Evolve, 0, 0), 3).unwrap();

        assert!(pop.contains(z));
        assert!(!pop.contains(w));
        let child = pop.members[2];
        let s = u.get(child).unwrap();
        assert_eq!(s.order, 2);
        assert_eq!(s.constituents.len(), 2);
        let record = &ledger.lineage[&child];
        assert_eq!(record.parents, vec![z]);
        // internal dependency edges are mirrored onto the clone
        for &c in &s.constituents {
            assert!(u.graph().has_direct_dependency(child, c));
        }
        assert_eq!(pop.origins.get(&child), Some(&None));
        for (id, record) in &ledger.lineage {
            for parent in &record.parents {
                assert_eq!(u.structural_order(*parent).unwrap(), u.structural_order(*id).unwrap());
            }
        }
    }
}
