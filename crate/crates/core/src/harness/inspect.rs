use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use super::Checkpoint;
use crate::hyperstruct::StructureId;
use crate::symbio::rank_by_score;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakRow {
    pub generation: u64,
    pub dependent: StructureId,
    pub dependee: StructureId,
    pub composite: StructureId,
    pub level_observed: u32,
    pub reversed_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectSummary {
    pub generation: u64,
    pub seed: u64,
    pub solved: bool,
    pub pop_order: u32,
    pub base_order: u32,
    pub roster_size: usize,
    pub population_limit: usize,
    /// Order to member ids.
    pub strata: BTreeMap<u32, Vec<StructureId>>,
    pub breaks: Vec<BreakRow>,
    /// Best five scored members.
    pub top_scores: Vec<(StructureId, f64)>,
}

pub fn inspect(ckpt: &Checkpoint) -> InspectSummary {
    let pop = &ckpt.population;
    let mut strata: BTreeMap<u32, Vec<StructureId>> = BTreeMap::new();
    for &m in &pop.members {
        let order = ckpt.universe.structural_order(m).unwrap_or(0);
        strata.entry(order).or_default().push(m);
    }
    let top_scores = rank_by_score(&ckpt.ledger, &pop.members)
        .into_iter()
        .filter_map(|m| ckpt.ledger.score(m).map(|s| (m, s)))
        .take(5)
        .collect();
    InspectSummary {
        generation: ckpt.generation,
        seed: ckpt.config.evolution.seed,
        solved: ckpt.solved,
        pop_order: pop.pop_order_n,
        base_order: pop.base_order_r,
        roster_size: pop.members.len(),
        population_limit: pop.population_limit,
        strata,
        breaks: pop
            .break_log
            .iter()
            .map(|e| BreakRow {
                generation: e.generation,
                dependent: e.dependent,
                dependee: e.dependee,
                composite: e.composite,
                level_observed: e.level_observed,
                reversed_at: e.reversed_at,
            })
            .collect(),
        top_scores,
    }
}

impl fmt::Display for InspectSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "generation: {}", self.generation)?;
        writeln!(f, "seed: {}", self.seed)?;
        writeln!(f, "solved: {}", self.solved)?;
        writeln!(f, "pop_order: {}", self.pop_order)?;
        writeln!(f, "base_order: {}", self.base_order)?;
        writeln!(f, "roster: {}/{}", self.roster_size, self.population_limit)?;
        writeln!(f, "strata:")?;
        for (order, ids) in &self.strata {
            let mut list = String::new();
            for (i, id) in ids.iter().enumerate() {
                if i > 0 {
                    list.push(' ');
                }
                let _ = write!(list, "{id}");
            }
            writeln!(f, "  order {order} ({}): {list}", ids.len())?;
        }
        writeln!(f, "breaks: {}", self.breaks.len())?;
        if !self.breaks.is_empty() {
            writeln!(f, "  generation  dependent  dependee  composite  level  reversed_at")?;
            for b in &self.breaks {
                let rev = b.reversed_at.map(|g| g.to_string()).unwrap_or_else(|| "-".into());
                writeln!(
                    f,
                    "  {:>10}  {:>9}  {:>8}  {:>9}  {:>5}  {:>11}",
                    b.generation,
                    b.dependent.to_string(),
                    b.dependee.to_string(),
                    b.composite.to_string(),
                    b.level_observed,
                    rev
                )?;
            }
        }
        writeln!(f, "top scores:")?;
        for (id, score) in &self.top_scores {
            writeln!(f, "  {id}: {score:.6}")?;
        }
        Ok(())
    }
}
