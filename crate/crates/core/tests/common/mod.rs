//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use busnet_core::criteria::{dominates, CostParams, CriterionRanges, CriterionVector};
use busnet_core::graph::{GraphParams, StationGraph};
use busnet_core::network::{BusNetwork, DemandMatrix, TimeWindow};
use busnet_core::resolution::{CandidateRoute, StopOrder};
use busnet_core::synthetic::{epoch, planar_network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn day_window() -> TimeWindow {
    TimeWindow::new(epoch(), epoch() + chrono::Duration::days(1)).unwrap()
}

pub fn cost() -> CostParams {
    CostParams {
        per_stop_cost: 10.0,
        headway: 0.25,
        service_span: 18.0,
        crew_wage: 30.0,
        fuel_cost: 1.2,
        maintenance_cost: 0.8,
        speed: 20.0,
    }
}

pub struct Instance {
    pub network: Arc<BusNetwork>,
    pub graph: Arc<StationGraph>,
    pub demand: Arc<DemandMatrix>,
}

/// A random planar instance whose station graph has at most `max_nodes` nodes and
/// more than one route; retries seeds derived from `seed` until one qualifies.
pub fn small_instance(seed: u64, max_nodes: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(5..=max_nodes);
        let length = rng.random_range(2.5..4.5);
        let mut pts: Vec<(String, f64, f64)> = vec![("o".into(), 0.0, 0.0), ("d".into(), length, 0.0)];
        for i in 0..n - 2 {
            pts.push((
                format!("x{i}"),
                rng.random_range(0.2..length - 0.2),
                rng.random_range(-0.9..0.9),
            ));
        }
        let refs: Vec<(&str, f64, f64)> = pts.iter().map(|(a, x, y)| (a.as_str(), *x, *y)).collect();
        let network = planar_network(&refs);
        let params = GraphParams {
            max_spacing_km: rng.random_range(1.2..2.2),
            ..GraphParams::default()
        };
        let Ok(graph) = StationGraph::build(Arc::clone(&network), "o", "d", params) else {
            continue;
        };
        if graph.len() > max_nodes || graph.paths_to_dest(0) < 2.0 || graph.paths_to_dest(0) > 500.0 {
            continue;
        }
        let mut counts = BTreeMap::new();
        for _ in 0..rng.random_range(5..40) {
            let a = rng.random_range(0..network.stops().len());
            let b = rng.random_range(0..network.stops().len());
            if a != b {
                *counts.entry((a, b)).or_insert(0) += rng.random_range(1..20u64);
            }
        }
        let demand = DemandMatrix {
            window: day_window(),
            counts,
        };
        return Instance {
            network,
            graph: Arc::new(graph),
            demand: Arc::new(demand),
        };
    }
}

/// All origin→destination paths by depth-first search.
pub fn enumerate_routes(g: &StationGraph) -> Vec<Vec<usize>> {
    fn go(g: &StationGraph, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let u = *path.last().unwrap();
        if u == g.destination() {
            out.push(path.clone());
            return;
        }
        for &v in g.successors(u) {
            path.push(v);
            go(g, path, out);
            path.pop();
        }
    }
    let mut out = Vec::new();
    go(g, &mut vec![g.origin()], &mut out);
    out
}

/// Shortest graph distance between two nodes by relaxation over all edges.
pub fn shortest(g: &StationGraph, from: usize, to: usize) -> f64 {
    let mut dist = vec![f64::INFINITY; g.len()];
    dist[from] = 0.0;
    for _ in 0..g.len() {
        for u in 0..g.len() {
            if dist[u].is_finite() {
                for &v in g.successors(u) {
                    let c = dist[u] + g.road_distance(u, v);
                    if c < dist[v] {
                        dist[v] = c;
                    }
                }
            }
        }
    }
    dist[to]
}

/// Criteria of a complete route computed directly from their definitions.
pub fn oracle_criteria(g: &StationGraph, demand: &DemandMatrix, cost: &CostParams, route: &[usize]) -> CriterionVector {
    let km: f64 = route.windows(2).map(|w| g.road_distance(w[0], w[1])).sum();
    let time = km / cost.speed + (route.len() as f64 - 2.0) * 2.0 / 60.0;
    let mut flow = 0.0;
    let mut directness = 0.0;
    for i in 0..route.len() {
        for j in i + 1..route.len() {
            let (u, v) = (route[i], route[j]);
            flow += demand.get(g.stop_of(u), g.stop_of(v)) as f64;
            let (delta, d) = (shortest(g, u, v), g.road_distance(u, v));
            if delta.is_finite() && d > 0.0 {
                directness += delta / d;
            }
        }
    }
    let service = cost.service_span / cost.headway
        * (2.0 * time * cost.crew_wage + 2.0 * time * cost.speed * (cost.maintenance_cost + cost.fuel_cost));
    CriterionVector {
        service_time: time,
        passenger_flow: flow,
        directness,
        construction_cost: route.len() as f64 * cost.per_stop_cost,
        service_cost: service,
    }
}

/// Non-dominated routes among the in-range ones, as sorted stop sequences.
pub fn brute_pareto(routes: &[(Vec<usize>, CriterionVector)], ranges: &CriterionRanges) -> Vec<Vec<usize>> {
    let inside: Vec<&(Vec<usize>, CriterionVector)> = routes.iter().filter(|(_, v)| ranges.contains(v)).collect();
    let mut out: Vec<Vec<usize>> = inside
        .iter()
        .filter(|(_, v)| !inside.iter().any(|(_, w)| dominates(w, v)))
        .map(|(r, _)| r.clone())
        .collect();
    out.sort();
    out
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn vectors_close(a: &CriterionVector, b: &CriterionVector, tol: f64) -> bool {
    a.to_array().iter().zip(b.to_array()).all(|(&x, y)| close(x, y, tol))
}

/// Number of origin→`node` paths, so that paths through `node` divided by it gives
/// the number of `node`→destination paths.
pub fn paths_to(g: &StationGraph, node: usize) -> usize {
    let mut count = vec![0usize; g.len()];
    count[0] = 1;
    for u in 0..g.len() {
        for &v in g.successors(u) {
            count[v] += count[u];
        }
    }
    count[node]
}

pub fn all_prefixes(routes: &[Vec<usize>]) -> BTreeSet<Vec<usize>> {
    let mut out = BTreeSet::new();
    for r in routes {
        for k in 1..=r.len() {
            out.insert(r[..k].to_vec());
        }
    }
    out
}

/// Subspace directness of `prefix` written out as explicit double sums over
/// topological indices.
pub fn expanded_directness(g: &StationGraph, routes: &[Vec<usize>], prefix: &[usize]) -> f64 {
    let n = g.len();
    let ratio = |u: usize, v: usize| {
        let (delta, d) = (shortest(g, u, v), g.road_distance(u, v));
        if u < v && delta.is_finite() && d > 0.0 {
            delta / d
        } else {
            0.0
        }
    };
    let last = *prefix.last().unwrap();
    let mut head = 0.0;
    for &u in prefix {
        for v in last..n {
            head += ratio(u, v);
        }
    }
    for v in last..n {
        for u in last + 1..v {
            head += ratio(u, v);
        }
    }
    let through = routes.iter().filter(|r| r.contains(&last)).count();
    let paths_from_last = through as f64 / paths_to(g, last) as f64;
    let mut inner = 0.0;
    for i in 0..prefix.len() {
        for j in i + 1..prefix.len() - 1 {
            inner += ratio(prefix[i], prefix[j]);
        }
    }
    head / paths_from_last + inner
}

/// Up to `max` routes of a random station graph with random criteria, plus the
/// graph's topological stop order.
pub fn candidate_routes(seed: u64, max: usize) -> (Vec<CandidateRoute>, StopOrder) {
    let inst = small_instance(seed, 12);
    let g = &inst.graph;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut routes = enumerate_routes(g);
    while routes.len() > max {
        let i = rng.random_range(0..routes.len());
        routes.swap_remove(i);
    }
    let out = routes
        .iter()
        .enumerate()
        .map(|(i, r)| CandidateRoute {
            id: format!("r{i}"),
            stops: r.iter().map(|&x| g.stop_id(x).to_string()).collect(),
            criteria: CriterionVector::from_array(std::array::from_fn(|_| rng.random_range(0.0..100.0))),
        })
        .collect();
    let order = StopOrder::new((0..g.len()).map(|x| g.stop_id(x).to_string()).collect()).unwrap();
    (out, order)
}
