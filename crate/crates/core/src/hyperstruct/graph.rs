use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::StructureId;

/// Observation levels at which an edge was recorded.
pub type Levels = BTreeSet<u32>;

/// Interaction (⊕) and direct dependency (←) edges between structures.
///
/// ⊕ edges are stored with the smaller id first; reflexivity is implied and
/// never stored. ← edges are stored as `(dependent, dependee)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InteractionGraph {
    interacts: BTreeMap<(StructureId, StructureId), Levels>,
    depends: BTreeMap<(StructureId, StructureId), Levels>,
}

fn unordered(a: StructureId, b: StructureId) -> (StructureId, StructureId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl InteractionGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn add_interaction(&mut self, a: StructureId, b: StructureId, level: u32) {
        if a == b {
            return;
        }
        self.interacts.entry(unordered(a, b)).or_default().insert(level);
    }

    /// Records a direct dependency and the interaction it implies. Order
    /// checks are the caller's job.
    pub(crate) fn add_dependency(&mut self, dependent: StructureId, dependee: StructureId, level: u32) {
        self.depends.entry((dependent, dependee)).or_default().insert(level);
        if !self.interacts.contains_key(&unordered(dependent, dependee)) {
            self.add_interaction(dependent, dependee, level);
        }
    }

    pub fn interacts(&self, a: StructureId, b: StructureId) -> bool {
        a == b || self.interacts.contains_key(&unordered(a, b))
    }

    pub fn has_direct_dependency(&self, dependent: StructureId, dependee: StructureId) -> bool {
        self.depends.contains_key(&(dependent, dependee))
    }

    /// Transitive closure over direct ← edges.
    pub fn depends_on(&self, a: StructureId, b: StructureId) -> bool {
        let mut adjacency: BTreeMap<StructureId, Vec<StructureId>> = BTreeMap::new();
        for &(dependent, dependee) in self.depends.keys() {
            adjacency.entry(dependent).or_default().push(dependee);
        }
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<StructureId> = adjacency.get(&a).into_iter().flatten().copied().collect();
        while let Some(next) = queue.pop_front() {
            if next == b {
                return true;
            }
            if seen.insert(next) {
                queue.extend(adjacency.get(&next).into_iter().flatten().copied());
            }
        }
        false
    }

    pub fn interaction_edges(&self) -> impl Iterator<Item = (StructureId, StructureId, &Levels)> {
        self.interacts.iter().map(|(&(a, b), levels)| (a, b, levels))
    }

    pub fn dependency_edges(&self) -> impl Iterator<Item = (StructureId, StructureId, &Levels)> {
        self.depends.iter().map(|(&(a, b), levels)| (a, b, levels))
    }

    pub fn interaction_count(&self) -> usize {
        self.interacts.len()
    }

    pub fn dependency_count(&self) -> usize {
        self.depends.len()
    }

    /// Inserts a raw edge without any checks. Used when restoring snapshots
    /// (and by tests building corrupt fixtures for the verifier).
    pub fn insert_raw_dependency(&mut self, dependent: StructureId, dependee: StructureId, level: u32) {
        self.depends.entry((dependent, dependee)).or_default().insert(level);
    }

    pub fn insert_raw_interaction(&mut self, a: StructureId, b: StructureId, level: u32) {
        self.add_interaction(a, b, level);
    }
}
