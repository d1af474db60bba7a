//! The breaking population.
//!
//! A [`Population`] is a roster of structures of mixed order sitting on top
//! of a [`Universe`]. It starts homogeneous at the base order `r` with
//! population order 1. A break aggregates two equal-order members of the top
//! stratum whose dependency was first observed at the current population
//! order into a composite one order higher, raising the population order by
//! exactly one. A reverse break dissolves such a composite again.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperstruct::{HyperError, StructureId, Universe};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PopulationError {
    #[error("{requested} members exceed the population limit {limit}")]
    LimitExceeded { requested: usize, limit: usize },
    #[error("a population needs at least one member")]
    EmptyPopulation,
    #[error("break precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("{0} is not an active composite created by a break")]
    NotAComposite(StructureId),
    #[error("the break that created {0} was already reversed")]
    AlreadyReversed(StructureId),
    #[error("invalid roster: {0}")]
    InvalidRoster(String),
    #[error(transparent)]
    Hyper(#[from] HyperError),
}

/// Declared orders of the problem (`x`) and of the initial solvers (`r`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub problem_order_x: u32,
    pub base_solver_order_r: u32,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self { problem_order_x: 1, base_solver_order_r: 1 }
    }
}

/// Observed but not yet housed dependencies between equal-order members,
/// keyed by `(dependent, dependee)` with every level they were seen at.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyEvidence {
    seen: BTreeMap<(StructureId, StructureId), BTreeSet<u32>>,
}

impl DependencyEvidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, dependent: StructureId, dependee: StructureId, level: u32) {
        self.seen.entry((dependent, dependee)).or_default().insert(level);
    }

    pub fn observed_at(&self, dependent: StructureId, dependee: StructureId, level: u32) -> bool {
        self.seen.get(&(dependent, dependee)).is_some_and(|l| l.contains(&level))
    }

    /// Seen at `level` and not at `level - 1`.
    pub fn emergent_at(&self, dependent: StructureId, dependee: StructureId, level: u32) -> bool {
        self.observed_at(dependent, dependee, level) && (level < 2 || !self.observed_at(dependent, dependee, level - 1))
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StructureId, StructureId, u32)> + '_ {
        self.seen.iter().flat_map(|(&(a, b), levels)| levels.iter().map(move |&l| (a, b, l)))
    }
}

impl Serialize for DependencyEvidence {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for DependencyEvidence {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let triples: Vec<(StructureId, StructureId, u32)> = Vec::deserialize(deserializer)?;
        let mut evidence = DependencyEvidence::new();
        for (a, b, l) in triples {
            evidence.record(a, b, l);
        }
        Ok(evidence)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakEvent {
    pub generation: u64,
    pub dependent: StructureId,
    pub dependee: StructureId,
    pub composite: StructureId,
    pub level_observed: u32,
    pub reversed_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Population {
    pub members: Vec<StructureId>,
    pub base_order_r: u32,
    pub pop_order_n: u32,
    pub population_limit: usize,
    pub break_log: Vec<BreakEvent>,
    /// Active composites mapped to the break they descend from. `None` marks
    /// composites adopted through [`Population::from_roster`].
    #[serde(default)]
    pub origins: BTreeMap<StructureId, Option<usize>>,
    /// Origins of composites absorbed by a break, restored on reverse.
    #[serde(default)]
    pub displaced: BTreeMap<StructureId, Option<usize>>,
}

/// Wraps each genome as a primitive (lifted to order `r` through single-child
/// constructions), declares all-pairs interaction at level 1 and returns the
/// order-1 population.
pub fn init_population<P>(
    universe: &mut Universe<P>,
    problem: &ProblemSpec,
    genomes: Vec<P>,
    limit: usize,
) -> Result<Population, PopulationError> {
    if genomes.is_empty() {
        return Err(PopulationError::EmptyPopulation);
    }
    if genomes.len() > limit {
        return Err(PopulationError::LimitExceeded { requested: genomes.len(), limit });
    }
    if problem.base_solver_order_r == 0 {
        return Err(PopulationError::InvalidRoster("base order must be at least 1".into()));
    }
    let mut members = Vec::with_capacity(genomes.len());
    for (i, genome) in genomes.into_iter().enumerate() {
        members.push(lift(universe, genome, problem.base_solver_order_r, i)?);
    }
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            universe.declare_interaction(a, b, 1)?;
        }
    }
    Ok(Population {
        members,
        base_order_r: problem.base_solver_order_r,
        pop_order_n: 1,
        population_limit: limit,
        break_log: Vec::new(),
        origins: BTreeMap::new(),
        displaced: BTreeMap::new(),
    })
}

/// Adds `genome` as a primitive and wraps it until it reaches `order`.
pub fn lift<P>(universe: &mut Universe<P>, genome: P, order: u32, index: usize) -> Result<StructureId, HyperError> {
    let mut id = universe.add_primitive(genome, format!("unit-{index}"));
    for _ in 1..order {
        id = universe.construct([id], format!("solver-{index}"))?;
    }
    Ok(id)
}

impl Population {
    /// Builds a population over an existing roster, deriving its order from the
    /// member orders. Members above the base order are adopted as dissolvable
    /// composites.
    pub fn from_roster<P>(
        universe: &Universe<P>,
        members: Vec<StructureId>,
        base_order_r: u32,
        population_limit: usize,
    ) -> Result<Self, PopulationError> {
        if members.is_empty() {
            return Err(PopulationError::EmptyPopulation);
        }
        if members.len() > population_limit {
            return Err(PopulationError::LimitExceeded { requested: members.len(), limit: population_limit });
        }
        let distinct: BTreeSet<_> = members.iter().collect();
        if distinct.len() != members.len() {
            return Err(PopulationError::InvalidRoster("duplicate member".into()));
        }
        let mut origins = BTreeMap::new();
        let mut top = 0;
        for &m in &members {
            let order = universe.structural_order(m)?;
            if order < base_order_r {
                return Err(PopulationError::InvalidRoster(format!("{m} has order {order} below the base order {base_order_r}")));
            }
            if order > base_order_r {
                origins.insert(m, None);
            }
            top = top.max(order);
        }
        Ok(Self {
            members,
            base_order_r,
            pop_order_n: top - base_order_r + 1,
            population_limit,
            break_log: Vec::new(),
            origins,
            displaced: BTreeMap::new(),
        })
    }

    /// Order of the highest stratum, `r + n − 1`.
    pub fn top_order(&self) -> u32 {
        self.base_order_r + self.pop_order_n - 1
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: StructureId) -> bool {
        self.members.contains(&id)
    }

    pub fn active_breaks(&self) -> usize {
        self.break_log.iter().filter(|e| e.reversed_at.is_none()).count()
    }

    /// Members grouped by structural order.
    pub fn strata<P>(&self, universe: &Universe<P>) -> Result<BTreeMap<u32, Vec<StructureId>>, HyperError> {
        let mut strata: BTreeMap<u32, Vec<StructureId>> = BTreeMap::new();
        for &m in &self.members {
            strata.entry(universe.structural_order(m)?).or_default().push(m);
        }
        Ok(strata)
    }

    fn qualifies<P>(&self, universe: &Universe<P>, evidence: &DependencyEvidence, x: StructureId, y: StructureId) -> bool {
        let top = self.top_order();
        x != y
            && self.contains(x)
            && self.contains(y)
            && universe.structural_order(x).ok() == Some(top)
            && universe.structural_order(y).ok() == Some(top)
            && top < universe.max_order()
            && evidence.emergent_at(x, y, self.pop_order_n)
    }

    /// Picks the lowest `(X, Y)` among the candidates whose dependency is
    /// emergent at the current population order. Returns `None` at a full
    /// roster.
    pub fn can_break<P>(
        &self,
        universe: &Universe<P>,
        evidence: &DependencyEvidence,
        candidates: &[(StructureId, StructureId)],
    ) -> Option<(StructureId, StructureId)> {
        if self.members.len() >= self.population_limit {
            return None;
        }
        candidates.iter().copied().filter(|&(x, y)| self.qualifies(universe, evidence, x, y)).min()
    }

    /// Aggregates `x` and `y` into a composite that takes `x`'s roster slot.
    /// Returns the composite id.
    pub fn apply_break<P>(
        &mut self,
        universe: &mut Universe<P>,
        evidence: &DependencyEvidence,
        x: StructureId,
        y: StructureId,
        generation: u64,
    ) -> Result<StructureId, PopulationError> {
        if self.members.len() >= self.population_limit {
            return Err(PopulationError::PreconditionViolated("roster is at the population limit".into()));
        }
        if !self.qualifies(universe, evidence, x, y) {
            return Err(PopulationError::PreconditionViolated(format!(
                "({x}, {y}) is not an emergent top-stratum dependency at level {}",
                self.pop_order_n
            )));
        }
        let level = self.pop_order_n + 1;
        let composite = universe.construct([x, y], format!("break-g{generation}"))?;
        universe.declare_dependency(composite, x, level)?;
        universe.declare_dependency(composite, y, level)?;
        let slot = self.members.iter().position(|&m| m == x).expect("qualified member");
        self.members[slot] = composite;
        if let Some(origin) = self.origins.remove(&x) {
            self.displaced.insert(x, origin);
        }
        self.origins.insert(composite, Some(self.break_log.len()));
        self.break_log.push(BreakEvent {
            generation,
            dependent: x,
            dependee: y,
            composite,
            level_observed: self.pop_order_n,
            reversed_at: None,
        });
        self.pop_order_n += 1;
        Ok(composite)
    }

    /// Dissolves an active composite, putting its constituents that are not
    /// already on the roster into its slot.
    pub fn apply_reverse_break<P>(
        &mut self,
        universe: &Universe<P>,
        composite: StructureId,
        generation: u64,
    ) -> Result<(), PopulationError> {
        if self.break_log.iter().any(|e| e.composite == composite && e.reversed_at.is_some()) {
            return Err(PopulationError::AlreadyReversed(composite));
        }
        let slot = self.members.iter().position(|&m| m == composite).ok_or(PopulationError::NotAComposite(composite))?;
        let origin = *self.origins.get(&composite).ok_or(PopulationError::NotAComposite(composite))?;
        let structure = universe.get(composite)?;
        let restored: Vec<StructureId> =
            structure.constituents.iter().copied().filter(|c| !self.members.contains(c)).collect();
        let new_len = self.members.len() - 1 + restored.len();
        if new_len > self.population_limit {
            return Err(PopulationError::LimitExceeded { requested: new_len, limit: self.population_limit });
        }
        for &c in &restored {
            if universe.structural_order(c)? > self.base_order_r {
                let origin = self.displaced.remove(&c).flatten();
                self.origins.insert(c, origin);
            }
        }
        self.members.splice(slot..=slot, restored);
        self.origins.remove(&composite);
        if let Some(event) = origin.and_then(|i| self.break_log.get_mut(i)) {
            if event.reversed_at.is_none() {
                event.reversed_at = Some(generation);
            }
        }
        self.pop_order_n = self.recompute_order(universe)?;
        Ok(())
    }

    fn recompute_order<P>(&self, universe: &Universe<P>) -> Result<u32, HyperError> {
        let mut top = self.base_order_r;
        for &m in &self.members {
            top = top.max(universe.structural_order(m)?);
        }
        Ok(1 + top - self.base_order_r)
    }

    /// Swaps a member for its offspring in the same slot; composite lineage
    /// follows the slot.
    pub fn replace_member(&mut self, old: StructureId, new: StructureId) {
        if let Some(slot) = self.members.iter().position(|&m| m == old) {
            self.members[slot] = new;
            if let Some(origin) = self.origins.remove(&old) {
                self.origins.insert(new, origin);
            }
        }
    }
}

/// True once the population's capability order reaches the declared problem
/// order and the environment reports success.
pub fn goal_reached(problem: &ProblemSpec, pop: &Population, solved: bool) -> bool {
    solved && pop.top_order() >= problem.problem_order_x
}

/// Stall trigger for breaking: fires when the best fitness improved by less
/// than `min_improvement` across the last `window_g` generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StallDetector {
    pub window_g: usize,
    pub min_improvement: f64,
    pub history: VecDeque<f64>,
}

impl StallDetector {
    pub fn new(window_g: usize, min_improvement: f64) -> Self {
        Self { window_g, min_improvement, history: VecDeque::with_capacity(window_g) }
    }

    pub fn record(&mut self, best: f64) {
        if self.history.len() == self.window_g {
            self.history.pop_front();
        }
        self.history.push_back(best);
    }

    pub fn clear(&mut self) {
        self.history.clear();
    }

    pub fn stalled(&self) -> bool {
        let series: Vec<f64> = self.history.iter().copied().collect();
        self.should_break(&series)
    }

    pub fn should_break(&self, best_fitness_series: &[f64]) -> bool {
        if self.window_g == 0 || best_fitness_series.len() < self.window_g {
            return false;
        }
        let window = &best_fitness_series[best_fitness_series.len() - self.window_g..];
        window[window.len() - 1] - window[0] < self.min_improvement
    }
}
