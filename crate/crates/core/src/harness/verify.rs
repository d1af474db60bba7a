use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::Checkpoint;
use crate::hyperstruct::{StructureId, Universe};
use crate::symbio::NeuronGene;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    /// Offending ids or edges, empty when passed.
    pub counterexamples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<InvariantCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            if c.passed {
                writeln!(f, "PASS {}", c.name)?;
            } else {
                writeln!(f, "FAIL {}: {}", c.name, c.counterexamples.join("; "))?;
            }
        }
        Ok(())
    }
}

/// Counterexamples beyond this many are summarized.
const MAX_EXAMPLES: usize = 10;

struct Suite {
    checks: Vec<InvariantCheck>,
}

impl Suite {
    fn add(&mut self, name: &str, mut bad: Vec<String>) {
        if bad.len() > MAX_EXAMPLES {
            let extra = bad.len() - MAX_EXAMPLES;
            bad.truncate(MAX_EXAMPLES);
            bad.push(format!("... and {extra} more"));
        }
        self.checks.push(InvariantCheck { name: name.to_string(), passed: bad.is_empty(), counterexamples: bad });
    }
}

/// Runs every structural, population and ledger invariant against a snapshot.
pub fn verify(ckpt: &Checkpoint) -> VerifyReport {
    let mut suite = Suite { checks: Vec::new() };
    let u = &ckpt.universe;

    suite.add("config-valid", ckpt.config.validate().err().map(|e| e.to_string()).into_iter().collect());
    let digest = ckpt.config.digest();
    suite.add(
        "config-digest",
        if digest == ckpt.config_digest { vec![] } else { vec![format!("recorded {} vs {}", ckpt.config_digest, digest)] },
    );

    hyper_checks(&mut suite, u);
    population_checks(&mut suite, ckpt);
    ledger_checks(&mut suite, ckpt);
    VerifyReport { checks: suite.checks }
}

fn order_of(u: &Universe<NeuronGene>, id: StructureId) -> Option<u32> {
    u.get(id).ok().map(|s| s.order)
}

fn hyper_checks(suite: &mut Suite, u: &Universe<NeuronGene>) {
    let mut dangling = Vec::new();
    let mut order_law = Vec::new();
    for s in u.structures() {
        let missing: Vec<_> = s.constituents.iter().filter(|c| !u.contains(**c)).collect();
        for c in &missing {
            dangling.push(format!("{} -> {}", s.id, c));
        }
        if s.constituents.is_empty() {
            if s.order != 1 || s.payload.is_none() {
                order_law.push(format!("{} primitive with order {}", s.id, s.order));
            }
        } else if missing.is_empty() {
            let expected = 1 + s.constituents.iter().filter_map(|&c| order_of(u, c)).max().unwrap_or(0);
            if s.order != expected || s.payload.is_some() {
                order_law.push(format!("{} has order {} but constituents give {}", s.id, s.order, expected));
            }
        }
        if s.order > u.max_order() {
            order_law.push(format!("{} exceeds max order {}", s.id, u.max_order()));
        }
    }
    suite.add("no-dangling-constituents", dangling);
    suite.add("order-law", order_law);
    suite.add("construction-acyclic", construction_cycles(u));

    let g = u.graph();
    let mut endpoints = Vec::new();
    for (a, b, levels) in g.interaction_edges() {
        if !u.contains(a) || !u.contains(b) {
            endpoints.push(format!("{a} <-> {b}"));
        }
        if levels.is_empty() || levels.contains(&0) {
            endpoints.push(format!("{a} <-> {b} has levels {levels:?}"));
        }
    }
    for (a, b, _) in g.dependency_edges() {
        if !u.contains(a) || !u.contains(b) {
            endpoints.push(format!("{a} <- {b}"));
        }
    }
    suite.add("edge-endpoints", endpoints);

    let mut symmetric = Vec::new();
    for (a, b, _) in g.interaction_edges() {
        if !(g.interacts(a, b) && g.interacts(b, a)) {
            symmetric.push(format!("{a} <-> {b}"));
        }
    }
    for id in u.ids() {
        if !g.interacts(id, id) {
            symmetric.push(format!("{id} not reflexive"));
        }
    }
    suite.add("interaction-symmetric-reflexive", symmetric);

    let mut implies = Vec::new();
    let mut gap = Vec::new();
    for (d, e, _) in g.dependency_edges() {
        if !g.interacts(d, e) {
            implies.push(format!("{d} <- {e}"));
        }
        if let (Some(od), Some(oe)) = (order_of(u, d), order_of(u, e)) {
            if od != oe + 1 {
                gap.push(format!("{d} <- {e} (orders {od}, {oe})"));
            }
        }
    }
    suite.add("dependency-implies-interaction", implies);
    suite.add("dependency-order-gap", gap);
    suite.add("dependency-closure", closure_mismatches(u));
}

fn construction_cycles(u: &Universe<NeuronGene>) -> Vec<String> {
    // 0 unvisited, 1 on stack, 2 done
    let mut state: BTreeMap<StructureId, u8> = BTreeMap::new();
    let mut bad = Vec::new();
    for root in u.ids() {
        if state.contains_key(&root) {
            continue;
        }
        let mut stack = vec![(root, false)];
        while let Some((id, exiting)) = stack.pop() {
            if exiting {
                state.insert(id, 2);
                continue;
            }
            match state.get(&id) {
                Some(2) => continue,
                Some(1) => {
                    bad.push(format!("cycle through {id}"));
                    continue;
                }
                _ => {}
            }
            state.insert(id, 1);
            stack.push((id, true));
            if let Ok(s) = u.get(id) {
                for &c in &s.constituents {
                    match state.get(&c) {
                        Some(1) => bad.push(format!("cycle through {c}")),
                        Some(2) => {}
                        _ => stack.push((c, false)),
                    }
                }
            }
        }
    }
    bad
}

/// Compares the graph's transitive query against a path enumeration over the
/// direct edges, for every pair among ids touched by dependency edges.
fn closure_mismatches(u: &Universe<NeuronGene>) -> Vec<String> {
    let g = u.graph();
    let mut direct: BTreeMap<StructureId, Vec<StructureId>> = BTreeMap::new();
    let mut touched = BTreeSet::new();
    for (d, e, _) in g.dependency_edges() {
        direct.entry(d).or_default().push(e);
        touched.insert(d);
        touched.insert(e);
    }
    let mut bad = Vec::new();
    for &a in &touched {
        let mut reach = BTreeSet::new();
        let mut frontier = vec![a];
        while let Some(x) = frontier.pop() {
            for &y in direct.get(&x).map(Vec::as_slice).unwrap_or(&[]) {
                if reach.insert(y) {
                    frontier.push(y);
                }
            }
        }
        for &b in &touched {
            if g.depends_on(a, b) != reach.contains(&b) {
                bad.push(format!("{a} <-* {b}"));
            }
        }
    }
    bad
}

fn population_checks(suite: &mut Suite, ckpt: &Checkpoint) {
    let u = &ckpt.universe;
    let pop = &ckpt.population;

    let mut limit = Vec::new();
    if pop.members.len() > pop.population_limit {
        limit.push(format!("{} members over limit {}", pop.members.len(), pop.population_limit));
    }
    if pop.population_limit != ckpt.config.population_limit {
        limit.push(format!("limit {} differs from config {}", pop.population_limit, ckpt.config.population_limit));
    }
    suite.add("population-limit", limit);

    let mut roster = Vec::new();
    let mut seen = BTreeSet::new();
    for &m in &pop.members {
        if !u.contains(m) {
            roster.push(format!("{m} missing from universe"));
        }
        if !seen.insert(m) {
            roster.push(format!("{m} listed twice"));
        }
    }
    if pop.members.is_empty() {
        roster.push("empty roster".into());
    }
    suite.add("roster-members", roster);

    let mut orders = Vec::new();
    if pop.pop_order_n == 0 {
        orders.push("population order 0".into());
    }
    let top = pop.base_order_r + pop.pop_order_n.saturating_sub(1);
    let mut highest = 0;
    for &m in &pop.members {
        if let Some(o) = order_of(u, m) {
            highest = highest.max(o);
            if o < pop.base_order_r || o > top {
                orders.push(format!("{m} has order {o} outside [{}, {top}]", pop.base_order_r));
            }
        }
    }
    if !pop.members.is_empty() && highest != top {
        orders.push(format!("top member order {highest} but r + n - 1 = {top}"));
    }
    suite.add("member-order-bounds", orders);

    let mut log = Vec::new();
    let mut replay = Vec::new();
    for (i, ev) in pop.break_log.iter().enumerate() {
        let Ok(z) = u.get(ev.composite) else {
            log.push(format!("event {i}: composite {} missing", ev.composite));
            continue;
        };
        if !z.constituents.contains(&ev.dependent) || !z.constituents.contains(&ev.dependee) {
            log.push(format!("event {i}: {} does not contain {} and {}", ev.composite, ev.dependent, ev.dependee));
        }
        let (od, oe) = (order_of(u, ev.dependent), order_of(u, ev.dependee));
        if od != oe || od.map(|o| o + 1) != Some(z.order) {
            log.push(format!("event {i}: orders {od:?}, {oe:?} under composite of order {}", z.order));
        }
        let g = u.graph();
        if !g.has_direct_dependency(ev.composite, ev.dependent) || !g.has_direct_dependency(ev.composite, ev.dependee) {
            log.push(format!("event {i}: missing {} <- constituent edge", ev.composite));
        }
        if let Some(r) = ev.reversed_at {
            if r < ev.generation {
                log.push(format!("event {i}: reversed at {r} before creation at {}", ev.generation));
            }
        }
        if !ckpt.ledger.evidence.emergent_at(ev.dependent, ev.dependee, ev.level_observed) {
            replay.push(format!(
                "event {i}: {} <- {} not emergent at level {}",
                ev.dependent, ev.dependee, ev.level_observed
            ));
        }
    }
    let mut last_gen = 0;
    for (i, ev) in pop.break_log.iter().enumerate() {
        if ev.generation < last_gen {
            log.push(format!("event {i}: generation {} out of order", ev.generation));
        }
        last_gen = ev.generation;
    }
    suite.add("break-log-consistency", log);
    suite.add("break-emergence-replay", replay);

    let mut origins = Vec::new();
    for &m in &pop.members {
        if order_of(u, m).is_some_and(|o| o > pop.base_order_r) && !pop.origins.contains_key(&m) {
            origins.push(format!("{m} is a composite without origin"));
        }
    }
    for (id, origin) in &pop.origins {
        if !pop.members.contains(id) {
            origins.push(format!("{id} has an origin but is off the roster"));
        }
        if let Some(i) = origin {
            match pop.break_log.get(*i) {
                None => origins.push(format!("{id} points at missing event {i}")),
                Some(ev) if ev.reversed_at.is_some() => origins.push(format!("{id} descends from reversed event {i}")),
                _ => {}
            }
        }
    }
    suite.add("composite-origins", origins);
}

fn ledger_checks(suite: &mut Suite, ckpt: &Checkpoint) {
    let u = &ckpt.universe;
    let ledger = &ckpt.ledger;

    let mut bounds = Vec::new();
    for (id, rec) in &ledger.per_member {
        if rec.fitness_samples.len() as u64 > rec.participation_count {
            bounds.push(format!("{id} has more samples than participations"));
        }
        if let Some(score) = rec.score {
            let lo = rec.fitness_samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = rec.fitness_samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(score >= lo && score <= hi) {
                bounds.push(format!("{id} score {score} outside [{lo}, {hi}]"));
            }
        }
    }
    suite.add("score-bounds", bounds);

    let mut lineage = Vec::new();
    for (child, rec) in &ledger.lineage {
        let Some(co) = order_of(u, *child) else {
            lineage.push(format!("{child} missing"));
            continue;
        };
        if co != rec.order {
            lineage.push(format!("{child} recorded order {} but has {co}", rec.order));
        }
        for &p in &rec.parents {
            match order_of(u, p) {
                Some(po) if po == co => {}
                other => lineage.push(format!("{child} (order {co}) has parent {p} of order {other:?}")),
            }
        }
    }
    suite.add("stratified-lineage", lineage);

    let mut genomes = Vec::new();
    if let Ok(env) = ckpt.config.validate() {
        let w_max = ckpt.config.evolution.w_max;
        for s in u.structures() {
            if let Some(g) = &s.payload {
                if !g.is_valid(env.input_dim, env.output_dim, w_max) {
                    genomes.push(format!("{} genome invalid", s.id));
                }
            }
        }
    } else {
        genomes.push("config does not validate".into());
    }
    suite.add("genome-validity", genomes);
}
