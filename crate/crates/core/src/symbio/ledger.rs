use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Assembly, EvolutionConfig, SymbioError};
use crate::hyperstruct::{StructureId, Universe};
use crate::population::{DependencyEvidence, Population};

/// Samples kept per member; older ones fall off the ring.
pub const SAMPLE_CAP: usize = 32;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub fitness_samples: VecDeque<f64>,
    pub participation_count: u64,
    pub score: Option<f64>,
}

/// Fitness sums for assemblies containing X, split by whether Y was present.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoTally {
    pub with_both_n: u64,
    pub with_both_sum: f64,
    pub with_x_only_n: u64,
    pub with_x_only_sum: f64,
}

impl CoTally {
    pub fn with_both_mean(&self) -> Option<f64> {
        (self.with_both_n > 0).then(|| self.with_both_sum / self.with_both_n as f64)
    }

    pub fn with_x_only_mean(&self) -> Option<f64> {
        (self.with_x_only_n > 0).then(|| self.with_x_only_sum / self.with_x_only_n as f64)
    }

    /// Mean fitness gain X sees when Y is present.
    pub fn marginal_gain(&self) -> Option<f64> {
        Some(self.with_both_mean()? - self.with_x_only_mean()?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub generation: u64,
    pub order: u32,
    pub parents: Vec<StructureId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessLedger {
    pub top_m: usize,
    pub per_member: BTreeMap<StructureId, MemberRecord>,
    #[serde(with = "pair_map")]
    pub cooccur: BTreeMap<(StructureId, StructureId), CoTally>,
    /// Every dependency observation made when a break was considered.
    pub evidence: DependencyEvidence,
    pub lineage: BTreeMap<StructureId, LineageRecord>,
}

mod pair_map {
    use super::*;

    pub fn serialize<S: serde::Serializer>(
        map: &BTreeMap<(StructureId, StructureId), CoTally>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|(&(x, y), t)| (x, y, t)))
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<(StructureId, StructureId), CoTally>, D::Error> {
        let entries: Vec<(StructureId, StructureId, CoTally)> = Vec::deserialize(d)?;
        Ok(entries.into_iter().map(|(x, y, t)| ((x, y), t)).collect())
    }
}

impl FitnessLedger {
    pub fn new(top_m: usize) -> Self {
        Self {
            top_m,
            per_member: BTreeMap::new(),
            cooccur: BTreeMap::new(),
            evidence: DependencyEvidence::new(),
            lineage: BTreeMap::new(),
        }
    }

    pub fn score(&self, id: StructureId) -> Option<f64> {
        self.per_member.get(&id).and_then(|r| r.score)
    }

    /// Drops per-member and co-occurrence records for ids off the roster.
    pub fn retain_members(&mut self, roster: &[StructureId]) {
        let active: BTreeSet<_> = roster.iter().copied().collect();
        self.per_member.retain(|id, _| active.contains(id));
        self.cooccur.retain(|(x, y), _| active.contains(x) && active.contains(y));
    }
}

/// Mean of the `top_m` largest values (all of them when fewer).
pub fn top_m_mean<'a>(samples: impl IntoIterator<Item = &'a f64>, top_m: usize) -> Option<f64> {
    let mut sorted: Vec<f64> = samples.into_iter().copied().collect();
    if sorted.is_empty() || top_m == 0 {
        return None;
    }
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.truncate(top_m);
    Some(sorted.iter().sum::<f64>() / sorted.len() as f64)
}

/// Credits every participant with the fitness of each assembly it joined and
/// rescores it as the mean of its `top_m` best samples. Members absent from
/// all assemblies are left alone.
pub fn distribute_fitness(ledger: &mut FitnessLedger, assemblies: &[Assembly]) -> Result<(), SymbioError> {
    if let Some(i) = assemblies.iter().position(|a| a.fitness.is_none()) {
        return Err(SymbioError::UnevaluatedAssembly(i));
    }
    let mut touched = BTreeSet::new();
    for assembly in assemblies {
        let fitness = assembly.fitness.expect("checked above");
        for &member in &assembly.participants {
            let record = ledger.per_member.entry(member).or_default();
            if record.fitness_samples.len() == SAMPLE_CAP {
                record.fitness_samples.pop_front();
            }
            record.fitness_samples.push_back(fitness);
            record.participation_count += 1;
            touched.insert(member);
        }
    }
    let top_m = ledger.top_m;
    for member in touched {
        let record = ledger.per_member.get_mut(&member).expect("touched member");
        record.score = top_m_mean(&record.fitness_samples, top_m);
    }
    Ok(())
}

/// Tallies, for every ordered pair of equal-order roster members, the fitness
/// of assemblies holding X with and without Y.
pub fn record_cooccurrence<P>(
    ledger: &mut FitnessLedger,
    universe: &Universe<P>,
    pop: &Population,
    assemblies: &[Assembly],
) -> Result<(), SymbioError> {
    let strata = pop.strata(universe)?;
    for members in strata.values() {
        for &x in members {
            for &y in members {
                if x == y {
                    continue;
                }
                for (i, assembly) in assemblies.iter().enumerate().filter(|(_, a)| a.contains(x)) {
                    let fitness = assembly.fitness.ok_or(SymbioError::UnevaluatedAssembly(i))?;
                    let tally = ledger.cooccur.entry((x, y)).or_default();
                    if assembly.contains(y) {
                        tally.with_both_n += 1;
                        tally.with_both_sum += fitness;
                    } else {
                        tally.with_x_only_n += 1;
                        tally.with_x_only_sum += fitness;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Equal-order top-stratum pairs where X gains at least `dependency_delta`
/// from Y's presence, with enough samples on both sides. Sorted.
pub fn detect_dependency<P>(
    ledger: &FitnessLedger,
    universe: &Universe<P>,
    pop: &Population,
    config: &EvolutionConfig,
) -> Vec<(StructureId, StructureId)> {
    let top = pop.top_order();
    let stratum: Vec<StructureId> =
        pop.members.iter().copied().filter(|&m| universe.structural_order(m).ok() == Some(top)).collect();
    let mut pairs = Vec::new();
    for &x in &stratum {
        for &y in &stratum {
            if x == y {
                continue;
            }
            let Some(tally) = ledger.cooccur.get(&(x, y)) else { continue };
            if tally.with_both_n < config.min_cooccur_samples || tally.with_x_only_n < config.min_cooccur_samples {
                continue;
            }
            if tally.marginal_gain().is_some_and(|g| g >= config.dependency_delta) {
                pairs.push((x, y));
            }
        }
    }
    pairs.sort();
    pairs
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::population::{init_population, ProblemSpec};

    fn assembly(participants: &[u64], fitness: f64) -> Assembly {
        Assembly {
            participants: participants.iter().map(|&i| StructureId(i)).collect(),
            wiring: Vec::new(),
            fitness: Some(fitness),
            solved: false,
        }
    }

    #[test]
    fn score_is_mean_of_top_m() {
        let mut ledger = FitnessLedger::new(2);
        let batch = [assembly(&[0, 1], 1.0), assembly(&[0, 2], 3.0), assembly(&[0, 3], 5.0)];
        distribute_fitness(&mut ledger, &batch).unwrap();
        assert_eq!(ledger.score(StructureId(0)), Some(4.0));
        assert_eq!(ledger.per_member[&StructureId(0)].participation_count, 3);
        assert_eq!(ledger.score(StructureId(1)), Some(1.0));
    }

    #[test]
    fn single_sample_and_untouched_members() {
        let mut ledger = FitnessLedger::new(3);
        distribute_fitness(&mut ledger, &[assembly(&[7], 2.0)]).unwrap();
        assert_eq!(ledger.score(StructureId(7)), Some(2.0));
        distribute_fitness(&mut ledger, &[assembly(&[8], 9.0)]).unwrap();
        assert_eq!(ledger.score(StructureId(7)), Some(2.0));
        assert_eq!(ledger.per_member[&StructureId(7)].participation_count, 1);
    }

    #[test]
    fn unevaluated_assembly_is_rejected() {
        let mut ledger = FitnessLedger::new(3);
        let mut a = assembly(&[1], 0.0);
        a.fitness = None;
        assert_eq!(distribute_fitness(&mut ledger, &[assembly(&[0], 1.0), a]), Err(SymbioError::UnevaluatedAssembly(1)));
        assert!(ledger.per_member.is_empty());
    }

    fn ledger_with(x: StructureId, y: StructureId, both: (u64, f64), x_only: (u64, f64)) -> FitnessLedger {
        let mut ledger = FitnessLedger::new(3);
        ledger.cooccur.insert(
            (x, y),
            CoTally {
                with_both_n: both.0,
                with_both_sum: both.1 * both.0 as f64,
                with_x_only_n: x_only.0,
                with_x_only_sum: x_only.1 * x_only.0 as f64,
            },
        );
        ledger
    }

    fn four() -> (Universe<u32>, Population) {
        let mut u = Universe::new();
        let pop = init_population(&mut u, &ProblemSpec::default(), vec![0, 1, 2, 3], 8).unwrap();
        (u, pop)
    }

    #[test]
    fn detect_dependency_thresholds() {
        let (u, pop) = four();
        let (x, y) = (pop.members[0], pop.members[1]);
        let config = EvolutionConfig { dependency_delta: 0.5, min_cooccur_samples: 5, ..EvolutionConfig::default() };

        let reported = ledger_with(x, y, (10, 3.0), (10, 1.0));
        assert_eq!(detect_dependency(&reported, &u, &pop, &config), vec![(x, y)]);

        let thin = ledger_with(x, y, (10, 3.0), (2, 1.0));
        assert!(detect_dependency(&thin, &u, &pop, &config).is_empty());

        let marginal = ledger_with(x, y, (10, 1.3), (10, 1.0));
        assert!(detect_dependency(&marginal, &u, &pop, &config).is_empty());
    }

    #[test]
    fn cooccurrence_splits_by_presence() {
        let (u, pop) = four();
        let m = &pop.members;
        let batch = vec![
            Assembly { participants: vec![m[0], m[1]], wiring: vec![], fitness: Some(3.0), solved: false },
            Assembly { participants: vec![m[0], m[2]], wiring: vec![], fitness: Some(1.0), solved: false },
        ];
        let mut ledger = FitnessLedger::new(3);
        record_cooccurrence(&mut ledger, &u, &pop, &batch).unwrap();
        let t = ledger.cooccur[&(m[0], m[1])];
        assert_eq!((t.with_both_n, t.with_x_only_n), (1, 1));
        assert_eq!(t.marginal_gain(), Some(2.0));
        assert_eq!(ledger.cooccur[&(m[1], m[0])].with_x_only_n, 0);
    }

    proptest! {
        #[test]
        fn score_stays_within_sample_range(batches in prop::collection::vec(
            prop::collection::vec((prop::collection::btree_set(0u64..6, 1..4), -10.0f64..10.0), 1..10), 1..5),
            top_m in 1usize..6)
        {
            let mut ledger = FitnessLedger::new(top_m);
            let mut seen: BTreeMap<StructureId, Vec<f64>> = BTreeMap::new();
            for batch in &batches {
                let assemblies: Vec<Assembly> = batch.iter().map(|(ids, f)| {
                    let ids: Vec<u64> = ids.iter().copied().collect();
                    assembly(&ids, *f)
                }).collect();
                for a in &assemblies {
                    for &p in &a.participants {
                        seen.entry(p).or_default().push(a.fitness.unwrap());
                    }
                }
                distribute_fitness(&mut ledger, &assemblies).unwrap();
            }
            for (id, fits) in &seen {
                let score = ledger.score(*id).unwrap();
                let lo = fits.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = fits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(score >= lo - 1e-12 && score <= hi + 1e-12);
            }
        }

        #[test]
        fn score_ignores_assemblies_without_member(batch in prop::collection::vec(
            (prop::collection::btree_set(0u64..6, 1..4), -10.0f64..10.0), 1..20))
        {
            let assemblies: Vec<Assembly> = batch.iter().map(|(ids, f)| {
                let ids: Vec<u64> = ids.iter().copied().collect();
                assembly(&ids, *f)
            }).collect();
            let mut full = FitnessLedger::new(3);
            distribute_fitness(&mut full, &assemblies).unwrap();
            for id in 0u64..6 {
                let only: Vec<Assembly> = assemblies.iter().filter(|a| a.contains(StructureId(id))).cloned().collect();
                let mut pruned = FitnessLedger::new(3);
                distribute_fitness(&mut pruned, &only).unwrap();
                prop_assert_eq!(full.score(StructureId(id)), pruned.score(StructureId(id)));
            }
        }
    }
}
