use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Structure, Universe};

/// Value carried by an observation: a named scalar or a small tuple.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObsValue {
    Int(i64),
    Real(f64),
    Tuple(Vec<f64>),
}

impl ObsValue {
    fn rank(&self) -> u8 {
        match self {
            ObsValue::Int(_) => 0,
            ObsValue::Real(_) => 1,
            ObsValue::Tuple(_) => 2,
        }
    }
}

impl Ord for ObsValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ObsValue::Int(a), ObsValue::Int(b)) => a.cmp(b),
            (ObsValue::Real(a), ObsValue::Real(b)) => a.total_cmp(b),
            (ObsValue::Tuple(a), ObsValue::Tuple(b)) => {
                for (x, y) in a.iter().zip(b) {
                    match x.total_cmp(y) {
                        Ordering::Equal => continue,
                        other => return other,
                    }
                }
                a.len().cmp(&b.len())
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for ObsValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for ObsValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ObsValue {}

/// One observed property of a structure, tagged with the level of the
/// observer that produced it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObsRecord {
    pub property: String,
    pub value: ObsValue,
    pub level: u32,
}

impl ObsRecord {
    pub fn new(property: impl Into<String>, value: ObsValue, level: u32) -> Self {
        Self { property: property.into(), value, level }
    }
}

/// A pure observation mechanism. It receives the level it is registered at
/// so that it can tag its records.
pub type Observer<P> = Arc<dyn Fn(&Structure<P>, &Universe<P>, u32) -> Vec<(String, ObsValue)> + Send + Sync>;

/// Observers keyed by the level they observe at.
pub struct ObserverRegistry<P> {
    observers: BTreeMap<u32, Vec<Observer<P>>>,
}

impl<P> Default for ObserverRegistry<P> {
    fn default() -> Self {
        Self { observers: BTreeMap::new() }
    }
}

impl<P> Clone for ObserverRegistry<P> {
    fn clone(&self) -> Self {
        Self { observers: self.observers.clone() }
    }
}

impl<P> fmt::Debug for ObserverRegistry<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let counts: BTreeMap<u32, usize> = self.observers.iter().map(|(l, v)| (*l, v.len())).collect();
        f.debug_struct("ObserverRegistry").field("observers", &counts).finish()
    }
}

impl<P> ObserverRegistry<P> {
    pub fn register<F>(&mut self, level: u32, observer: F)
    where
        F: Fn(&Structure<P>, &Universe<P>, u32) -> Vec<(String, ObsValue)> + Send + Sync + 'static,
    {
        self.observers.entry(level).or_default().push(Arc::new(observer));
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> + '_ {
        self.observers.keys().copied()
    }

    /// Records produced at `level` can only come from observers registered
    /// at `level`; the level tag is applied here, not by the observer.
    pub(crate) fn run(&self, structure: &Structure<P>, universe: &Universe<P>, level: u32) -> BTreeSet<ObsRecord> {
        self.observers
            .get(&level)
            .into_iter()
            .flatten()
            .flat_map(|obs| obs(structure, universe, level))
            .map(|(property, value)| ObsRecord { property, value, level })
            .collect()
    }
}
