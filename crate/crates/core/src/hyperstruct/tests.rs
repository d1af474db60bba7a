use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;

fn pair_size_observer(u: &mut Universe<String>) {
    u.observers_mut().register(2, |s, _, _| {
        if s.order == 2 {
            vec![("pair-size".to_string(), ObsValue::Int(s.constituents.len() as i64))]
        } else {
            Vec::new()
        }
    });
}

#[test]
fn first_primitive_gets_id_zero() {
    let mut u = Universe::new();
    let a = u.add_primitive("genome-A".to_string(), "a");
    assert_eq!(a, StructureId(0));
    assert_eq!(u.structural_order(a).unwrap(), 1);
}

#[test]
fn fourth_primitive_keeps_everyone_order_one() {
    let mut u = Universe::new();
    for i in 0..4 {
        u.add_primitive(i, format!("p{i}"));
    }
    assert_eq!(u.len(), 4);
    assert!(u.structures().all(|s| s.order == 1 && s.constituents.is_empty() && s.payload.is_some()));
}

#[test]
fn many_primitives_have_distinct_ids() {
    let mut u = Universe::new();
    let ids: Vec<_> = (0..120).map(|i| u.add_primitive(i, "")).collect();
    for (i, a) in ids.iter().enumerate() {
        assert_eq!(a.0, i as u64);
        for b in &ids[i + 1..] {
            assert_ne!(a, b);
        }
    }
}

#[test]
fn construct_orders() {
    let mut u = Universe::new();
    let a = u.add_primitive(0, "a");
    let b = u.add_primitive(1, "b");
    let pair = u.construct([a, b], "pair").unwrap();
    assert_eq!(u.structural_order(pair).unwrap(), 2);
    // cumulative: one order-2 and one order-1 constituent
    let c = u.add_primitive(2, "c");
    let mixed = u.construct([pair, c], "mixed").unwrap();
    assert_eq!(u.structural_order(mixed).unwrap(), 3);
    assert!(u.interacts(mixed, pair).unwrap());
    assert!(u.interacts(c, mixed).unwrap());
}

#[test]
fn construct_allows_overlap() {
    let mut u = Universe::new();
    let a = u.add_primitive(0, "a");
    let b = u.add_primitive(1, "b");
    let c = u.add_primitive(2, "c");
    let ab = u.construct([a, b], "").unwrap();
    let bc = u.construct([b, c], "").unwrap();
    assert!(u.get(ab).unwrap().constituents.contains(&b));
    assert!(u.get(bc).unwrap().constituents.contains(&b));
}

#[test]
fn layered_supervision_has_order_two_plus_r() {
    for r in 1..=3u32 {
        let mut u: Universe<u32> = Universe::new();
        let mut agents = Vec::new();
        for i in 0..6 {
            let mut id = u.add_primitive(i, "agent");
            for _ in 1..r {
                id = u.construct([id], "wrap").unwrap();
            }
            agents.push(id);
        }
        let clusters: Vec<_> = agents.chunks(3).map(|c| u.construct(c.iter().copied(), "cluster").unwrap()).collect();
        let supervisor = u.construct(clusters, "supervisor").unwrap();
        assert_eq!(u.structural_order(supervisor).unwrap(), 2 + r);
    }
}

#[test]
fn construct_errors() {
    let mut u: Universe<u8> = Universe::new();
    assert_eq!(u.construct(Vec::new(), "x"), Err(HyperError::EmptyConstituents));
    assert_eq!(u.construct([StructureId(9)], "x"), Err(HyperError::UnknownStructure(StructureId(9))));
    assert_eq!(u.structural_order(StructureId(3)), Err(HyperError::UnknownStructure(StructureId(3))));
}

#[test]
fn construct_respects_max_order() {
    let mut u: Universe<u8> = Universe::with_max_order(2);
    let a = u.add_primitive(0, "");
    let b = u.construct([a], "").unwrap();
    assert_eq!(u.construct([b], ""), Err(HyperError::OrderCapExceeded { order: 3, max_order: 2 }));
}

#[test]
fn chain_order_matches_traversal() {
    let mut u: Universe<u8> = Universe::new();
    let p = u.add_primitive(0, "");
    let pair = u.construct([p], "").unwrap();
    let nested = u.construct([pair], "").unwrap();
    fn depth(u: &Universe<u8>, id: StructureId) -> u32 {
        let s = u.get(id).unwrap();
        1 + s.constituents.iter().map(|&c| depth(u, c)).max().unwrap_or(0)
    }
    assert_eq!(u.structural_order(nested).unwrap(), 3);
    assert_eq!(depth(&u, nested), 3);
}

#[test]
fn interaction_declarations() {
    let mut u: Universe<u8> = Universe::new();
    let a = u.add_primitive(0, "");
    let b = u.add_primitive(1, "");
    assert!(u.interacts(a, a).unwrap());
    assert!(!u.interacts(a, b).unwrap());
    u.declare_interaction(a, b, 1).unwrap();
    u.declare_interaction(a, b, 1).unwrap();
    assert!(u.interacts(b, a).unwrap());
    assert_eq!(u.graph().interaction_count(), 1);
    assert_eq!(u.declare_interaction(a, StructureId(7), 1), Err(HyperError::UnknownStructure(StructureId(7))));
}

#[test]
fn dependency_order_gap_rules() {
    let mut u: Universe<u8> = Universe::new();
    let a = u.add_primitive(0, "");
    let b = u.add_primitive(1, "");
    let ab = u.construct([a, b], "").unwrap();
    let top = u.construct([ab], "").unwrap();

    u.declare_dependency(ab, a, 2).unwrap();
    assert!(u.interacts(ab, a).unwrap());
    assert!(u.depends_on(ab, a).unwrap());

    assert!(matches!(u.declare_dependency(top, a, 3), Err(HyperError::OrderGapViolation { .. })));
    assert!(matches!(u.declare_dependency(a, ab, 2), Err(HyperError::OrderGapViolation { .. })));
    assert!(matches!(u.declare_dependency(a, b, 1), Err(HyperError::OrderGapViolation { .. })));
}

#[test]
fn dependency_implies_fresh_interaction() {
    let mut u: Universe<u8> = Universe::new();
    let a = u.add_primitive(0, "");
    let b = u.add_primitive(1, "");
    let lone = u.construct([b], "").unwrap();
    assert!(!u.interacts(lone, a).unwrap());
    u.declare_dependency(lone, a, 2).unwrap();
    assert!(u.interacts(a, lone).unwrap());
}

#[test]
fn depends_on_is_transitive_closure() {
    let mut u: Universe<u8> = Universe::new();
    let c = u.add_primitive(0, "");
    let b = u.construct([c], "").unwrap();
    let a = u.construct([b], "").unwrap();
    let other = u.add_primitive(1, "");
    u.declare_dependency(a, b, 3).unwrap();
    u.declare_dependency(b, c, 2).unwrap();
    assert!(u.depends_on(a, b).unwrap());
    assert!(u.depends_on(a, c).unwrap());
    assert!(!u.depends_on(a, other).unwrap());
    assert!(!u.depends_on(c, a).unwrap());
}

#[test]
fn observe_filters_by_level() {
    let mut u: Universe<String> = Universe::new();
    let a = u.add_primitive("a".into(), "");
    let b = u.add_primitive("b".into(), "");
    let ab = u.construct([a, b], "").unwrap();
    assert!(u.observe(ab, 2).unwrap().is_empty());
    pair_size_observer(&mut u);
    let obs = u.observe(ab, 2).unwrap();
    let expected: BTreeSet<_> = [ObsRecord::new("pair-size", ObsValue::Int(2), 2)].into_iter().collect();
    assert_eq!(obs, expected);
    assert!(u.observe(ab, 1).unwrap().is_empty());
    assert_eq!(u.observe(ab, 2).unwrap(), obs);
}

#[test]
fn emergence_definition() {
    let mut u: Universe<String> = Universe::new();
    let a = u.add_primitive("a".into(), "");
    let b = u.add_primitive("b".into(), "");
    let ab = u.construct([a, b], "").unwrap();
    pair_size_observer(&mut u);
    assert!(u.is_emergent("pair-size", ab).unwrap());
    assert!(!u.is_emergent("missing", ab).unwrap());
    assert_eq!(u.is_emergent("pair-size", a), Err(HyperError::NotComposite(a)));

    // the same property visible on a constituent at level 1 breaks emergence
    u.observers_mut().register(1, |s, _, _| {
        if s.payload.as_deref() == Some("b") {
            vec![("pair-size".to_string(), ObsValue::Int(1))]
        } else {
            Vec::new()
        }
    });
    assert!(!u.is_emergent("pair-size", ab).unwrap());
}

#[test]
fn primitives_of_flattens_shared_parts_once() {
    let mut u: Universe<u8> = Universe::new();
    let a = u.add_primitive(0, "");
    let b = u.add_primitive(1, "");
    let c = u.add_primitive(2, "");
    let ab = u.construct([a, b], "").unwrap();
    let bc = u.construct([b, c], "").unwrap();
    let top = u.construct([ab, bc], "").unwrap();
    assert_eq!(u.primitives_of(top).unwrap(), vec![a, b, c]);
    assert_eq!(u.primitives_of(b).unwrap(), vec![b]);
}

#[test]
fn json_shape_and_round_trip() {
    let mut u: Universe<String> = Universe::new();
    let a = u.add_primitive("ga".into(), "a");
    let b = u.add_primitive("gb".into(), "b");
    let ab = u.construct([a, b], "ab").unwrap();
    u.declare_dependency(ab, a, 2).unwrap();
    let v = serde_json::to_value(&u).unwrap();
    assert_eq!(v["structures"][2]["order"], 2);
    assert_eq!(v["structures"][2]["constituents"], serde_json::json!([0, 1]));
    assert!(v["structures"][2].get("payload").is_none());
    assert_eq!(v["structures"][0]["payload"], "ga");
    assert_eq!(v["depends"], serde_json::json!([[2, 0, 2]]));
    let back: Universe<String> = serde_json::from_value(v).unwrap();
    assert_eq!(back, u);
}

#[test]
fn json_is_order_insensitive_for_sets() {
    let doc = r#"{
        "structures": [
            {"id": 2, "order": 2, "constituents": [1, 0], "tag": "ab"},
            {"id": 0, "order": 1, "constituents": [], "tag": "a", "payload": 10},
            {"id": 1, "order": 1, "constituents": [], "tag": "b", "payload": 11}
        ],
        "interacts": [[2, 1, 2], [0, 2, 2]],
        "depends": []
    }"#;
    let u: Universe<u32> = serde_json::from_str(doc).unwrap();
    let mut v = Universe::new();
    let a = v.add_primitive(10u32, "a");
    let b = v.add_primitive(11, "b");
    v.construct([a, b], "ab").unwrap();
    assert_eq!(u, v);
}

/// Builds a random universe from a script of (kind, picks) steps.
pub(crate) fn scripted_universe(script: &[(u8, Vec<usize>)]) -> Universe<u32> {
    let mut u = Universe::new();
    for (i, (kind, picks)) in script.iter().enumerate() {
        let ids: Vec<_> = u.ids().collect();
        if ids.is_empty() || kind % 3 == 0 {
            u.add_primitive(i as u32, "p");
            continue;
        }
        let chosen: Vec<_> = picks.iter().map(|p| ids[p % ids.len()]).collect();
        if kind % 3 == 1 {
            let _ = u.construct(chosen, "c");
        } else if chosen.len() >= 2 {
            let _ = u.declare_dependency(chosen[0], chosen[1], 1);
        }
    }
    u
}

fn script_strategy() -> impl Strategy<Value = Vec<(u8, Vec<usize>)>> {
    prop::collection::vec((any::<u8>(), prop::collection::vec(any::<usize>(), 1..4)), 1..12)
}

proptest! {
    #[test]
    fn order_law_holds(script in script_strategy()) {
        let u = scripted_universe(&script);
        for s in u.structures() {
            if s.constituents.is_empty() {
                prop_assert_eq!(s.order, 1);
            } else {
                let max = s.constituents.iter().map(|&c| u.get(c).unwrap().order).max().unwrap();
                prop_assert_eq!(s.order, max + 1);
            }
        }
    }

    #[test]
    fn direct_dependencies_span_one_order(script in script_strategy()) {
        let u = scripted_universe(&script);
        for (a, b, _) in u.graph().dependency_edges() {
            prop_assert!(u.graph().interacts(a, b));
            prop_assert_eq!(u.get(a).unwrap().order, u.get(b).unwrap().order + 1);
        }
    }
}
