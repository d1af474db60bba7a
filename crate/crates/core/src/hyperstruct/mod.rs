//! Ordered hyper-structures.
//!
//! A [`Universe`] holds every structure ever created. Order-1 structures are
//! primitives carrying a payload; higher-order structures are built from a
//! set of lower-order constituents, and their order is one more than the
//! highest constituent order. Constituents may span several lower orders and
//! may be shared between aggregates.
//!
//! On top of the construction relation sit two edge kinds: interaction (⊕,
//! reflexive and symmetric) and direct dependency (←, spanning exactly one
//! order). Observation happens through pure observer functions registered
//! per level, and [`Universe::is_emergent`] checks whether a property shows
//! up at a composite's own level while being absent from every constituent
//! one level down.

mod graph;
mod observe;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{InteractionGraph, Levels};
pub use observe::{ObsRecord, ObsValue, Observer, ObserverRegistry};

/// Default cap on structural order.
pub const DEFAULT_MAX_ORDER: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StructureId(pub u64);

impl fmt::Display for StructureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Structure<P> {
    pub id: StructureId,
    pub order: u32,
    pub constituents: BTreeSet<StructureId>,
    pub payload: Option<P>,
    pub tag: String,
}

impl<P> Structure<P> {
    pub fn is_primitive(&self) -> bool {
        self.order == 1
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HyperError {
    #[error("unknown structure {0}")]
    UnknownStructure(StructureId),
    #[error("construction needs at least one constituent")]
    EmptyConstituents,
    #[error("dependency {dependent} <- {dependee} spans orders {dependent_order} and {dependee_order}; a direct dependency must span exactly one order")]
    OrderGapViolation {
        dependent: StructureId,
        dependee: StructureId,
        dependent_order: u32,
        dependee_order: u32,
    },
    #[error("structure {0} is a primitive and has no lower level to compare against")]
    NotComposite(StructureId),
    #[error("order {order} exceeds the configured maximum {max_order}")]
    OrderCapExceeded { order: u32, max_order: u32 },
    #[error("observation level must be at least 1")]
    ZeroLevel,
    #[error("malformed universe snapshot: {0}")]
    Malformed(String),
}

/// Container of structures, their interaction graph and the observers.
#[derive(Debug, Clone)]
pub struct Universe<P> {
    structures: BTreeMap<StructureId, Structure<P>>,
    graph: InteractionGraph,
    observers: ObserverRegistry<P>,
    next_id: u64,
    max_order: u32,
}

impl<P> Default for Universe<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Universe<P> {
    pub fn new() -> Self {
        Self::with_max_order(DEFAULT_MAX_ORDER)
    }

    pub fn with_max_order(max_order: u32) -> Self {
        Self {
            structures: BTreeMap::new(),
            graph: InteractionGraph::new(),
            observers: ObserverRegistry::default(),
            next_id: 0,
            max_order,
        }
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn set_max_order(&mut self, max_order: u32) {
        self.max_order = max_order;
    }

    pub fn len(&self) -> usize {
        self.structures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.structures.is_empty()
    }

    pub fn graph(&self) -> &InteractionGraph {
        &self.graph
    }

    /// Mutable graph access for snapshot repair and fixtures. Normal code goes
    /// through the checked operations.
    pub fn graph_mut(&mut self) -> &mut InteractionGraph {
        &mut self.graph
    }

    pub fn observers_mut(&mut self) -> &mut ObserverRegistry<P> {
        &mut self.observers
    }

    pub fn structures(&self) -> impl Iterator<Item = &Structure<P>> {
        self.structures.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = StructureId> + '_ {
        self.structures.keys().copied()
    }

    pub fn contains(&self, id: StructureId) -> bool {
        self.structures.contains_key(&id)
    }

    pub fn get(&self, id: StructureId) -> Result<&Structure<P>, HyperError> {
        self.structures.get(&id).ok_or(HyperError::UnknownStructure(id))
    }

    fn require(&self, id: StructureId) -> Result<(), HyperError> {
        self.get(id).map(|_| ())
    }

    fn fresh_id(&mut self) -> StructureId {
        let id = StructureId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn add_primitive(&mut self, payload: P, tag: impl Into<String>) -> StructureId {
        let id = self.fresh_id();
        self.structures.insert(
            id,
            Structure { id, order: 1, constituents: BTreeSet::new(), payload: Some(payload), tag: tag.into() },
        );
        id
    }

    /// Builds a structure one order above its highest constituent and links it
    /// to each constituent with a ⊕ edge at its own level.
    pub fn construct<I>(&mut self, constituents: I, tag: impl Into<String>) -> Result<StructureId, HyperError>
    where
        I: IntoIterator<Item = StructureId>,
    {
        let constituents: BTreeSet<StructureId> = constituents.into_iter().collect();
        if constituents.is_empty() {
            return Err(HyperError::EmptyConstituents);
        }
        let mut top = 0;
        for &c in &constituents {
            top = top.max(self.get(c)?.order);
        }
        let order = top + 1;
        if order > self.max_order {
            return Err(HyperError::OrderCapExceeded { order, max_order: self.max_order });
        }
        let id = self.fresh_id();
        for &c in &constituents {
            self.graph.add_interaction(id, c, order);
        }
        self.structures.insert(id, Structure { id, order, constituents, payload: None, tag: tag.into() });
        Ok(id)
    }

    pub fn structural_order(&self, id: StructureId) -> Result<u32, HyperError> {
        Ok(self.get(id)?.order)
    }

    pub fn declare_interaction(&mut self, a: StructureId, b: StructureId, level: u32) -> Result<(), HyperError> {
        self.require(a)?;
        self.require(b)?;
        if level == 0 {
            return Err(HyperError::ZeroLevel);
        }
        self.graph.add_interaction(a, b, level);
        Ok(())
    }

    pub fn interacts(&self, a: StructureId, b: StructureId) -> Result<bool, HyperError> {
        self.require(a)?;
        self.require(b)?;
        Ok(self.graph.interacts(a, b))
    }

    /// Records `dependent ← dependee`. Only direct edges with an order gap of
    /// exactly one are accepted.
    pub fn declare_dependency(&mut self, dependent: StructureId, dependee: StructureId, level: u32) -> Result<(), HyperError> {
        let dependent_order = self.structural_order(dependent)?;
        let dependee_order = self.structural_order(dependee)?;
        if level == 0 {
            return Err(HyperError::ZeroLevel);
        }
        if dependent_order != dependee_order + 1 {
            return Err(HyperError::OrderGapViolation { dependent, dependee, dependent_order, dependee_order });
        }
        self.graph.add_dependency(dependent, dependee, level);
        Ok(())
    }

    pub fn depends_on(&self, a: StructureId, b: StructureId) -> Result<bool, HyperError> {
        self.require(a)?;
        self.require(b)?;
        Ok(self.graph.depends_on(a, b))
    }

    pub fn observe(&self, id: StructureId, level: u32) -> Result<BTreeSet<ObsRecord>, HyperError> {
        let structure = self.get(id)?;
        if level == 0 {
            return Err(HyperError::ZeroLevel);
        }
        Ok(self.observers.run(structure, self, level))
    }

    /// True iff `property` is observed on `id` at its own order N and on none
    /// of its constituents at level N − 1.
    pub fn is_emergent(&self, property: &str, id: StructureId) -> Result<bool, HyperError> {
        let structure = self.get(id)?;
        if structure.order < 2 {
            return Err(HyperError::NotComposite(id));
        }
        let n = structure.order;
        let has = |records: &BTreeSet<ObsRecord>| records.iter().any(|r| r.property == property);
        if !has(&self.observe(id, n)?) {
            return Ok(false);
        }
        for &c in &structure.constituents {
            if has(&self.observe(c, n - 1)?) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All order-1 structures reachable through the constituent relation, in
    /// first-visit order (depth first, constituents by ascending id).
    pub fn primitives_of(&self, id: StructureId) -> Result<Vec<StructureId>, HyperError> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        self.collect_primitives(id, &mut seen, &mut out)?;
        Ok(out)
    }

    fn collect_primitives(
        &self,
        id: StructureId,
        seen: &mut BTreeSet<StructureId>,
        out: &mut Vec<StructureId>,
    ) -> Result<(), HyperError> {
        if !seen.insert(id) {
            return Ok(());
        }
        let s = self.get(id)?;
        if s.order == 1 {
            out.push(id);
        }
        for &c in &s.constituents {
            self.collect_primitives(c, seen, out)?;
        }
        Ok(())
    }

    /// Inserts a structure verbatim. Snapshot restore only; callers are
    /// responsible for the invariants (the verifier checks them afterwards).
    pub fn insert_raw(&mut self, structure: Structure<P>) {
        self.next_id = self.next_id.max(structure.id.0 + 1);
        self.structures.insert(structure.id, structure);
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "P: Serialize", deserialize = "P: DeserializeOwned"))]
struct StructureDoc<P> {
    id: StructureId,
    order: u32,
    constituents: Vec<StructureId>,
    tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payload: Option<P>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "P: Serialize", deserialize = "P: DeserializeOwned"))]
struct UniverseDoc<P> {
    structures: Vec<StructureDoc<P>>,
    interacts: Vec<(StructureId, StructureId, u32)>,
    depends: Vec<(StructureId, StructureId, u32)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    next_id: Option<u64>,
}

impl<P: Serialize + Clone> Serialize for Universe<P> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let structures = self
            .structures
            .values()
            .map(|s| StructureDoc {
                id: s.id,
                order: s.order,
                constituents: s.constituents.iter().copied().collect(),
                tag: s.tag.clone(),
                payload: s.payload.clone(),
            })
            .collect();
        let interacts = self
            .graph
            .interaction_edges()
            .flat_map(|(a, b, levels)| levels.iter().map(move |&l| (a, b, l)))
            .collect();
        let depends = self
            .graph
            .dependency_edges()
            .flat_map(|(a, b, levels)| levels.iter().map(move |&l| (a, b, l)))
            .collect();
        let next_id = (self.next_id != self.structures.keys().next_back().map_or(0, |id| id.0 + 1)).then_some(self.next_id);
        UniverseDoc { structures, interacts, depends, next_id }.serialize(serializer)
    }
}

impl<'de, P: DeserializeOwned> Deserialize<'de> for Universe<P> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = UniverseDoc::<P>::deserialize(deserializer)?;
        let mut universe = Universe::new();
        for s in doc.structures {
            if universe.contains(s.id) {
                return Err(serde::de::Error::custom(format!("duplicate structure id {}", s.id)));
            }
            universe.insert_raw(Structure {
                id: s.id,
                order: s.order,
                constituents: s.constituents.into_iter().collect(),
                payload: s.payload,
                tag: s.tag,
            });
        }
        for (a, b, level) in doc.interacts {
            universe.graph.insert_raw_interaction(a, b, level);
        }
        for (a, b, level) in doc.depends {
            universe.graph.insert_raw_dependency(a, b, level);
        }
        if let Some(next) = doc.next_id {
            universe.next_id = universe.next_id.max(next);
        }
        Ok(universe)
    }
}

impl<P: PartialEq> PartialEq for Universe<P> {
    fn eq(&self, other: &Self) -> bool {
        self.structures == other.structures && self.graph == other.graph && self.next_id == other.next_id
    }
}

#[cfg(test)]
mod tests;
