mod common;

use std::collections::BTreeSet;

use busnet_core::criteria::CriterionVector;
use busnet_core::resolution::{cluster_cores, CandidateRoute, MarkerState, ResolutionSession, StopOrder};
use common::*;
use proptest::prelude::*;

fn encode(order: &StopOrder, stops: &[String]) -> Vec<usize> {
    stops.iter().map(|s| order.position(s).unwrap()).collect()
}

fn subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

fn check_session(s: &ResolutionSession) {
    let order = s.order();
    let live: BTreeSet<String> = s.candidates().map(|r| r.id.clone()).collect();
    let mut attributed = BTreeSet::new();
    for c in s.clusters() {
        assert!(!c.members.is_empty());
        let core = encode(order, &c.core);
        for m in &c.members {
            assert!(attributed.insert(m.clone()), "route {m} in two clusters");
            let r = s.routes().iter().find(|r| &r.id == m).unwrap();
            assert!(subset(&core, &encode(order, &r.stops)));
        }
        let concrete: Vec<&String> = c.pattern.iter().filter(|p| *p != "*").collect();
        assert_eq!(concrete, c.core.iter().collect::<Vec<_>>());
        if c.members.len() == 1 {
            assert!(c.criterion_stats.values().all(|v| v[0] == v[4]));
        }
    }
    assert_eq!(attributed, live);
    if live.len() > 1 {
        assert!(s.clusters().len() >= 2);
        assert!(!s.conflicts().is_empty(), "several candidates but nothing to resolve");
        assert_eq!(s.conflicts().iter().filter(|c| c.status == MarkerState::Active).count(), 1);
        for c in s.conflicts() {
            assert!(c.alternatives.len() >= 2);
        }
    }
    let markers = s.marker_states();
    let stops: BTreeSet<String> = s.clusters().iter().flat_map(|c| c.core.iter().cloned()).collect();
    assert_eq!(markers.keys().cloned().collect::<BTreeSet<_>>(), stops);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn merging_stops_at_beta_or_when_no_legal_merge(seed in 0u64..100_000, beta in 2usize..7) {
        let (routes, order) = candidate_routes(seed, 40);
        let sets: Vec<Vec<usize>> = routes.iter().map(|r| encode(&order, &r.stops)).collect();
        let scores: Vec<f64> = routes.iter().map(|r| r.criteria.to_array().iter().sum()).collect();
        let g = cluster_cores(&sets, &scores, beta);
        prop_assert!(g.len() >= 2.min(sets.len()));
        if g.len() > beta {
            let mut best = 0;
            for u in 0..g.len() {
                for v in u + 1..g.len() {
                    best = best.max(g[u].iter().filter(|x| g[v].contains(x)).count());
                }
            }
            for u in 0..g.len() {
                for v in u + 1..g.len() {
                    let x: Vec<usize> = g[u].iter().copied().filter(|x| g[v].contains(x)).collect();
                    if x.len() == best {
                        prop_assert!(g.iter().all(|gi| subset(&x, gi)), "a legal merge was left");
                    }
                }
            }
        }
        // Every route still contains some core.
        for r in &sets {
            prop_assert!(g.iter().any(|c| subset(c, r)));
        }
    }

    #[test]
    fn random_resolutions_terminate_and_undo_exactly(seed in 0u64..100_000, beta in 2usize..6, picks in proptest::collection::vec(0usize..1000, 40)) {
        let (routes, order) = candidate_routes(seed, 30);
        let n = routes.len();
        let mut s = ResolutionSession::new(routes, Some(order), CriterionVector::from_array([1.0; 5]), beta).unwrap();
        check_session(&s);
        let mut states = vec![s.state().clone()];
        let mut choices = Vec::new();
        let mut steps = 0;
        while !s.is_final() {
            let conflict = s.active_conflict().unwrap();
            let alts = &s.conflicts()[conflict].alternatives;
            let alt = &alts[picks[steps % picks.len()] % alts.len()];
            let cluster = alt.clusters[picks[(steps + 7) % picks.len()] % alt.clusters.len()];
            let before = s.candidates().count();
            s.resolve(conflict, cluster).unwrap();
            prop_assert!(s.candidates().count() < before);
            check_session(&s);
            choices.push((conflict, cluster));
            states.push(s.state().clone());
            steps += 1;
        }
        prop_assert!(steps < n.max(2));
        prop_assert!(s.final_route().is_some());
        // Replaying the recorded choices on a fresh session gives the same states.
        let (routes, order) = candidate_routes(seed, 30);
        let mut replay = ResolutionSession::new(routes, Some(order), CriterionVector::from_array([1.0; 5]), beta).unwrap();
        for (i, &(c, k)) in choices.iter().enumerate() {
            prop_assert_eq!(replay.state(), &states[i]);
            replay.resolve(c, k).unwrap();
        }
        prop_assert_eq!(replay.state(), s.state());
        for i in (0..steps).rev() {
            s.undo().unwrap();
            prop_assert_eq!(s.state(), &states[i]);
        }
        prop_assert!(s.undo().is_err());
    }
}

#[test]
fn three_route_fixture_via_graph_order() {
    let route = |id: &str, stops: &[&str]| CandidateRoute {
        id: id.into(),
        stops: stops.iter().map(|s| s.to_string()).collect(),
        criteria: CriterionVector::from_array([1.0; 5]),
    };
    let order = StopOrder::new(["1", "2", "3", "4", "6", "7", "5"].iter().map(|s| s.to_string()).collect()).unwrap();
    let routes = vec![
        route("a", &["1", "3", "4", "5"]),
        route("b", &["1", "3", "6", "5"]),
        route("c", &["1", "2", "7", "5"]),
    ];
    let s = ResolutionSession::new(routes, Some(order), CriterionVector::from_array([1.0; 5]), 2).unwrap();
    let mut patterns: Vec<String> = s.clusters().iter().map(|c| c.pattern.join("-")).collect();
    patterns.sort();
    assert_eq!(patterns, vec!["1-2-7-5", "1-3-*-5"]);
}
