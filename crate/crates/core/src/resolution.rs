//! Route clustering by shared stops, conflict detection between clusters, and the
//! progressive resolution session that narrows candidates down to one route.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{Criterion, CriterionVector};

pub const WILDCARD: &str = "*";
pub const DEFAULT_BETA: usize = 4;

#[derive(Debug, Error)]
pub enum ResolutionError {
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("cannot align routes: {0}")]
    Alignment(String),
}

impl ResolutionError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Params(_) => "invalid_parameter",
            Self::State(_) => "invalid_state",
            Self::Alignment(_) => "alignment_error",
        }
    }
}

/// A route offered for resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRoute {
    pub id: String,
    pub stops: Vec<String>,
    pub criteria: CriterionVector,
}

/// Total order of stops consistent with every candidate route.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StopOrder {
    stops: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl StopOrder {
    pub fn new(stops: Vec<String>) -> Result<Self, ResolutionError> {
        let mut index = HashMap::with_capacity(stops.len());
        for (i, s) in stops.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(ResolutionError::Params(format!("stop `{s}` appears twice in the stop order")));
            }
        }
        Ok(Self { stops, index })
    }

    /// Order induced by the routes themselves; ties go to the stop seen first.
    pub fn from_routes(routes: &[CandidateRoute]) -> Result<Self, ResolutionError> {
        let mut ids: Vec<&str> = Vec::new();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for r in routes {
            for s in &r.stops {
                pos.entry(s.as_str()).or_insert_with(|| {
                    ids.push(s);
                    ids.len() - 1
                });
            }
        }
        let mut succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ids.len()];
        let mut indeg = vec![0usize; ids.len()];
        for r in routes {
            for w in r.stops.windows(2) {
                let (a, b) = (pos[w[0].as_str()], pos[w[1].as_str()]);
                if succ[a].insert(b) {
                    indeg[b] += 1;
                }
            }
        }
        let mut ready: BTreeSet<usize> = (0..ids.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(ids.len());
        while let Some(u) = ready.pop_first() {
            order.push(ids[u].to_string());
            for &v in &succ[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.insert(v);
                }
            }
        }
        if order.len() != ids.len() {
            return Err(ResolutionError::Alignment("routes visit stops in contradictory orders".into()));
        }
        Self::new(order)
    }

    pub fn position(&self, stop: &str) -> Option<usize> {
        self.index.get(stop).copied()
    }

    pub fn stop(&self, pos: usize) -> &str {
        &self.stops[pos]
    }

    pub fn stops(&self) -> &[String] {
        &self.stops
    }

    /// Positions of a route's stops, which must be strictly increasing.
    fn encode(&self, route: &CandidateRoute) -> Result<Vec<usize>, ResolutionError> {
        let mut out = Vec::with_capacity(route.stops.len());
        for s in &route.stops {
            let p = self
                .position(s)
                .ok_or_else(|| ResolutionError::Alignment(format!("stop `{s}` of route `{}` is not in the stop order", route.id)))?;
            if out.last().is_some_and(|&last| last >= p) {
                return Err(ResolutionError::Alignment(format!("route `{}` does not follow the stop order", route.id)));
            }
            out.push(p);
        }
        Ok(out)
    }
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Merges stop sets until at most `beta` remain or no merge keeps a second choice.
/// `routes` are sorted stop sets and `scores` their weighted criterion sums. Cores
/// come back sorted.
pub fn cluster_cores(routes: &[Vec<usize>], scores: &[f64], beta: usize) -> Vec<Vec<usize>> {
    let mut g: Vec<Vec<usize>> = routes.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let mut alive = vec![true; g.len()];
    // Pairwise intersection sizes, grown as merged cores are appended.
    let mut size: Vec<Vec<usize>> = (0..g.len())
        .map(|u| (0..u).map(|v| intersect(&g[u], &g[v]).len()).collect())
        .collect();
    let mut count = g.len();
    while count > beta {
        let live: Vec<usize> = (0..g.len()).filter(|&u| alive[u]).collect();
        let mut best = 0;
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (i, &u) in live.iter().enumerate() {
            for &v in &live[..i] {
                let s = size[u][v];
                if s > best {
                    best = s;
                    pairs.clear();
                }
                if s == best {
                    pairs.push((u, v));
                }
            }
        }
        let candidates: BTreeSet<Vec<usize>> = pairs.iter().map(|&(u, v)| intersect(&g[u], &g[v])).collect();
        let mut chosen: Option<(f64, Vec<usize>)> = None;
        for x in candidates {
            if live.iter().all(|&i| is_subset(&x, &g[i])) {
                continue;
            }
            let values: Vec<f64> = routes
                .iter()
                .zip(scores)
                .filter(|(r, _)| is_subset(&x, r))
                .map(|(_, &s)| s)
                .collect();
            if values.is_empty() {
                continue;
            }
            let sd = std_dev(&values);
            if chosen.as_ref().is_none_or(|(best_sd, _)| sd < *best_sd) {
                chosen = Some((sd, x));
            }
        }
        let Some((_, gm)) = chosen else {
            break;
        };
        for &i in &live {
            if is_subset(&gm, &g[i]) {
                alive[i] = false;
                count -= 1;
            }
        }
        size.push((0..g.len()).map(|v| if alive[v] { intersect(&gm, &g[v]).len() } else { 0 }).collect());
        g.push(gm);
        alive.push(true);
        count += 1;
    }
    let mut out: Vec<Vec<usize>> = g.into_iter().zip(alive).filter(|(_, a)| *a).map(|(c, _)| c).collect();
    out.sort();
    out
}

/// Five-number summary: min, lower quartile, median, upper quartile, max.
pub fn five_numbers(values: &[f64]) -> [f64; 5] {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (v.len() - 1) as f64 * p;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    [q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteCluster {
    /// Core stops in order with `*` wherever some member has stops in between.
    pub pattern: Vec<String>,
    pub core: Vec<String>,
    pub members: Vec<String>,
    pub criterion_stats: BTreeMap<String, [f64; 5]>,
    #[serde(skip)]
    core_pos: Vec<usize>,
    #[serde(skip)]
    member_idx: Vec<usize>,
}

impl RouteCluster {
    pub fn is_final_choice(&self) -> bool {
        self.members.len() == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerState {
    Resolved,
    Active,
    Pending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub elements: Vec<String>,
    /// Indices into the session's clusters.
    pub clusters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    /// Shared stops before and after the disputed stretch.
    pub position: (String, String),
    pub alternatives: Vec<Alternative>,
    pub status: MarkerState,
}

/// Weighted sum of min-max normalised criteria, oriented so that 1 is best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    weights: [f64; 5],
    lo: [f64; 5],
    hi: [f64; 5],
}

impl Scorer {
    pub fn new(weights: &CriterionVector, routes: &[CandidateRoute]) -> Result<Self, ResolutionError> {
        let w = weights.to_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ResolutionError::Params("weights must be finite and non-negative".into()));
        }
        let mut lo = [f64::INFINITY; 5];
        let mut hi = [f64::NEG_INFINITY; 5];
        for r in routes {
            for (i, v) in r.criteria.to_array().into_iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        Ok(Self { weights: w, lo, hi })
    }

    pub fn score(&self, v: &CriterionVector) -> f64 {
        Criterion::ALL
            .iter()
            .map(|c| {
                let i = c.index();
                let span = self.hi[i] - self.lo[i];
                let norm = if span > 0.0 { (v.get(*c) - self.lo[i]) / span } else { 0.0 };
                self.weights[i] * if c.maximize() { norm } else { 1.0 - norm }
            })
            .sum()
    }
}

/// Clusters `routes` and attributes each route to the largest core it contains, ties
/// going to the lexicographically smallest pattern. Clusters left without members are
/// dropped; if fewer than two remain for several routes, every route stands alone.
pub fn cluster_routes(
    routes: &[CandidateRoute],
    order: &StopOrder,
    scorer: &Scorer,
    beta: usize,
) -> Result<Vec<RouteCluster>, ResolutionError> {
    if routes.is_empty() {
        return Err(ResolutionError::Params("no routes to cluster".into()));
    }
    if beta < 2 {
        return Err(ResolutionError::Params(format!("beta must be at least 2, got {beta}")));
    }
    let encoded: Vec<Vec<usize>> = routes.iter().map(|r| order.encode(r)).collect::<Result<_, _>>()?;
    let scores: Vec<f64> = routes.iter().map(|r| scorer.score(&r.criteria)).collect();
    let cores = cluster_cores(&encoded, &scores, beta);
    let mut clusters = build_clusters(&cores, &encoded, routes, order);
    if clusters.len() < 2 && routes.len() > 1 {
        let singles: Vec<Vec<usize>> = encoded.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        clusters = build_clusters(&singles, &encoded, routes, order);
    }
    Ok(clusters)
}

fn build_clusters(cores: &[Vec<usize>], encoded: &[Vec<usize>], routes: &[CandidateRoute], order: &StopOrder) -> Vec<RouteCluster> {
    let patterns: Vec<Vec<String>> = cores
        .iter()
        .map(|core| {
            let members: Vec<&Vec<usize>> = encoded.iter().filter(|r| is_subset(core, r)).collect();
            pattern_of(core, &members, order)
        })
        .collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cores.len()];
    for (ri, r) in encoded.iter().enumerate() {
        let owner = (0..cores.len())
            .filter(|&c| is_subset(&cores[c], r))
            .max_by(|&a, &b| cores[a].len().cmp(&cores[b].len()).then_with(|| patterns[b].cmp(&patterns[a])));
        if let Some(c) = owner {
            members[c].push(ri);
        }
    }
    let mut out: Vec<RouteCluster> = cores
        .iter()
        .zip(patterns)
        .zip(members)
        .filter(|(_, m)| !m.is_empty())
        .map(|((core, pattern), member_idx)| {
            let criterion_stats = Criterion::ALL
                .iter()
                .map(|c| {
                    let values: Vec<f64> = member_idx.iter().map(|&i| routes[i].criteria.get(*c)).collect();
                    (c.name().to_string(), five_numbers(&values))
                })
                .collect();
            RouteCluster {
                pattern,
                core: core.iter().map(|&p| order.stop(p).to_string()).collect(),
                members: member_idx.iter().map(|&i| routes[i].id.clone()).collect(),
                criterion_stats,
                core_pos: core.clone(),
                member_idx,
            }
        })
        .collect();
    out.sort_by(|a, b| a.core_pos.cmp(&b.core_pos));
    out
}

fn pattern_of(core: &[usize], members: &[&Vec<usize>], order: &StopOrder) -> Vec<String> {
    let mut out = Vec::new();
    for (k, &p) in core.iter().enumerate() {
        if k > 0 {
            let prev = core[k - 1];
            if members.iter().any(|r| r.iter().any(|&x| x > prev && x < p)) {
                out.push(WILDCARD.to_string());
            }
        }
        out.push(order.stop(p).to_string());
    }
    out
}

/// Conflicts between clusters, in route order. The first one is active.
pub fn detect_conflicts(clusters: &[RouteCluster], order: &StopOrder) -> Result<Vec<Conflict>, ResolutionError> {
    let Some(first) = clusters.first() else {
        return Err(ResolutionError::Params("no clusters".into()));
    };
    let mut shared: Vec<usize> = first.core_pos.clone();
    for c in &clusters[1..] {
        shared = intersect(&shared, &c.core_pos);
    }
    let ends_agree = clusters.iter().all(|c| {
        c.core_pos.first() == shared.first() && c.core_pos.last() == shared.last()
    });
    if shared.is_empty() || !ends_agree {
        return Err(ResolutionError::Alignment("clusters do not share their first and last stops".into()));
    }
    let mut out = Vec::new();
    for w in shared.windows(2) {
        let (a, b) = (order.stop(w[0]), order.stop(w[1]));
        let mut alternatives: Vec<Alternative> = Vec::new();
        for (ci, c) in clusters.iter().enumerate() {
            let start = c.pattern.iter().position(|s| s == a).expect("shared stop in pattern");
            let end = c.pattern.iter().position(|s| s == b).expect("shared stop in pattern");
            let elements = c.pattern[start + 1..end].to_vec();
            match alternatives.iter_mut().find(|x| x.elements == elements) {
                Some(x) => x.clusters.push(ci),
                None => alternatives.push(Alternative { elements, clusters: vec![ci] }),
            }
        }
        if alternatives.len() >= 2 {
            let status = if out.is_empty() { MarkerState::Active } else { MarkerState::Pending };
            out.push(Conflict {
                position: (a.to_string(), b.to_string()),
                alternatives,
                status,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionState {
    /// Indices into the session's routes.
    pub candidates: Vec<usize>,
    pub clusters: Vec<RouteCluster>,
    pub conflicts: Vec<Conflict>,
}

/// Serializable picture of a session for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionView {
    pub beta: usize,
    pub candidates: Vec<String>,
    pub clusters: Vec<RouteCluster>,
    pub conflicts: Vec<Conflict>,
    pub markers: BTreeMap<String, MarkerState>,
    pub final_route: Option<CandidateRoute>,
    pub history_depth: usize,
}

#[derive(Debug, Clone)]
pub struct ResolutionSession {
    routes: Vec<CandidateRoute>,
    order: StopOrder,
    scorer: Scorer,
    beta: usize,
    state: ResolutionState,
    history: Vec<ResolutionState>,
}

impl ResolutionSession {
    /// Starts a session. Criteria are normalised over `routes` once, here. Without an
    /// explicit `order`, the order implied by the routes is used.
    pub fn new(
        routes: Vec<CandidateRoute>,
        order: Option<StopOrder>,
        weights: CriterionVector,
        beta: usize,
    ) -> Result<Self, ResolutionError> {
        if routes.is_empty() {
            return Err(ResolutionError::Params("at least one route is required".into()));
        }
        let mut ids = BTreeSet::new();
        for r in &routes {
            if !ids.insert(r.id.as_str()) {
                return Err(ResolutionError::Params(format!("duplicate route id `{}`", r.id)));
            }
            if r.stops.len() < 2 {
                return Err(ResolutionError::Params(format!("route `{}` has fewer than two stops", r.id)));
            }
        }
        let order = match order {
            Some(o) => o,
            None => StopOrder::from_routes(&routes)?,
        };
        let scorer = Scorer::new(&weights, &routes)?;
        let mut session = Self {
            routes,
            order,
            scorer,
            beta,
            state: ResolutionState {
                candidates: Vec::new(),
                clusters: Vec::new(),
                conflicts: Vec::new(),
            },
            history: Vec::new(),
        };
        session.state = session.build_state((0..session.routes.len()).collect())?;
        Ok(session)
    }

    fn build_state(&self, candidates: Vec<usize>) -> Result<ResolutionState, ResolutionError> {
        let subset: Vec<CandidateRoute> = candidates.iter().map(|&i| self.routes[i].clone()).collect();
        let mut clusters = cluster_routes(&subset, &self.order, &self.scorer, self.beta)?;
        for c in &mut clusters {
            for m in &mut c.member_idx {
                *m = candidates[*m];
            }
        }
        let conflicts = if candidates.len() > 1 {
            detect_conflicts(&clusters, &self.order)?
        } else {
            Vec::new()
        };
        Ok(ResolutionState {
            candidates,
            clusters,
            conflicts,
        })
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn order(&self) -> &StopOrder {
        &self.order
    }

    pub fn routes(&self) -> &[CandidateRoute] {
        &self.routes
    }

    pub fn state(&self) -> &ResolutionState {
        &self.state
    }

    pub fn clusters(&self) -> &[RouteCluster] {
        &self.state.clusters
    }

    pub fn conflicts(&self) -> &[Conflict] {
        &self.state.conflicts
    }

    pub fn candidates(&self) -> impl Iterator<Item = &CandidateRoute> {
        self.state.candidates.iter().map(|&i| &self.routes[i])
    }

    pub fn history_depth(&self) -> usize {
        self.history.len()
    }

    pub fn active_conflict(&self) -> Option<usize> {
        self.state.conflicts.iter().position(|c| c.status == MarkerState::Active)
    }

    pub fn is_final(&self) -> bool {
        self.state.candidates.len() == 1
    }

    pub fn final_route(&self) -> Option<&CandidateRoute> {
        self.is_final().then(|| &self.routes[self.state.candidates[0]])
    }

    /// Makes another conflict the one under examination.
    pub fn activate_conflict(&mut self, conflict: usize) -> Result<(), ResolutionError> {
        if conflict >= self.state.conflicts.len() {
            return Err(ResolutionError::Params(format!("no conflict {conflict}")));
        }
        for (i, c) in self.state.conflicts.iter_mut().enumerate() {
            c.status = if i == conflict { MarkerState::Active } else { MarkerState::Pending };
        }
        Ok(())
    }

    /// Keeps the members of `cluster` and reclusters them.
    pub fn resolve(&mut self, conflict: usize, cluster: usize) -> Result<(), ResolutionError> {
        if self.is_final() {
            return Err(ResolutionError::State("the session already has a final route".into()));
        }
        if self.active_conflict() != Some(conflict) {
            return Err(ResolutionError::State(format!("conflict {conflict} is not the active conflict")));
        }
        let c = self
            .state
            .clusters
            .get(cluster)
            .ok_or_else(|| ResolutionError::Params(format!("no cluster {cluster}")))?;
        let mut candidates = c.member_idx.clone();
        candidates.sort_unstable();
        let next = self.build_state(candidates)?;
        let prev = std::mem::replace(&mut self.state, next);
        self.history.push(prev);
        Ok(())
    }

    pub fn undo(&mut self) -> Result<(), ResolutionError> {
        let prev = self
            .history
            .pop()
            .ok_or_else(|| ResolutionError::State("nothing to undo".into()))?;
        self.state = prev;
        Ok(())
    }

    /// Marker per stop of the live clusters: shared by all clusters, inside the active
    /// conflict, or inside a conflict still waiting.
    pub fn marker_states(&self) -> BTreeMap<String, MarkerState> {
        let mut out = BTreeMap::new();
        let clusters = &self.state.clusters;
        if clusters.is_empty() {
            return out;
        }
        let mut shared = clusters[0].core_pos.clone();
        for c in &clusters[1..] {
            shared = intersect(&shared, &c.core_pos);
        }
        let conflict_of = |p: usize| {
            self.state.conflicts.iter().find(|c| {
                let (a, b) = (self.order.position(&c.position.0), self.order.position(&c.position.1));
                matches!((a, b), (Some(a), Some(b)) if a < p && p < b)
            })
        };
        for c in clusters {
            for &p in &c.core_pos {
                let state = if shared.binary_search(&p).is_ok() {
                    MarkerState::Resolved
                } else {
                    match conflict_of(p) {
                        Some(k) if k.status == MarkerState::Active => MarkerState::Active,
                        _ => MarkerState::Pending,
                    }
                };
                out.insert(self.order.stop(p).to_string(), state);
            }
        }
        out
    }

    pub fn view(&self) -> ResolutionView {
        ResolutionView {
            beta: self.beta,
            candidates: self.candidates().map(|r| r.id.clone()).collect(),
            clusters: self.state.clusters.clone(),
            conflicts: self.state.conflicts.clone(),
            markers: self.marker_states(),
            final_route: self.final_route().cloned(),
            history_depth: self.history.len(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn route(id: &str, stops: &str, time: f64) -> CandidateRoute {
        CandidateRoute {
            id: id.into(),
            stops: stops.split('-').map(String::from).collect(),
            criteria: CriterionVector {
                service_time: time,
                passenger_flow: 0.0,
                directness: 0.0,
                construction_cost: 0.0,
                service_cost: 0.0,
            },
        }
    }

    fn fixture_routes() -> Vec<CandidateRoute> {
        vec![route("a", "1-3-4-5", 1.0), route("b", "1-3-6-5", 2.0), route("c", "1-2-7-5", 3.0)]
    }

    fn weights() -> CriterionVector {
        CriterionVector::from_array([1.0; 5])
    }

    #[test]
    fn fixture_clusters_and_conflict() {
        let s = ResolutionSession::new(fixture_routes(), None, weights(), 2).unwrap();
        let patterns: Vec<String> = s.clusters().iter().map(|c| c.pattern.join("-")).collect();
        assert_eq!(patterns, vec!["1-3-*-5", "1-2-7-5"]);
        assert_eq!(s.conflicts().len(), 1);
        let c = &s.conflicts()[0];
        assert_eq!(c.position, ("1".to_string(), "5".to_string()));
        let alts: Vec<String> = c.alternatives.iter().map(|a| a.elements.join(",")).collect();
        assert_eq!(alts, vec!["3,*", "2,7"]);
        let m = s.marker_states();
        assert_eq!(m["1"], MarkerState::Resolved);
        assert_eq!(m["5"], MarkerState::Resolved);
        assert_eq!(m["3"], MarkerState::Active);
        assert!(!m.contains_key("4"));
    }

    #[test]
    fn choosing_wildcard_cluster_opens_next_conflict() {
        let mut s = ResolutionSession::new(fixture_routes(), None, weights(), 2).unwrap();
        s.resolve(0, 0).unwrap();
        assert_eq!(s.conflicts().len(), 1);
        let c = &s.conflicts()[0];
        assert_eq!(c.position, ("3".to_string(), "5".to_string()));
        let alts: Vec<String> = c.alternatives.iter().map(|a| a.elements.join(",")).collect();
        assert_eq!(alts, vec!["4", "6"]);
        s.resolve(0, 0).unwrap();
        assert_eq!(s.final_route().unwrap().id, "a");
    }

    #[test]
    fn choosing_single_route_cluster_is_final() {
        let mut s = ResolutionSession::new(fixture_routes(), None, weights(), 2).unwrap();
        s.resolve(0, 1).unwrap();
        assert!(s.is_final());
        assert_eq!(s.final_route().unwrap().id, "c");
        assert!(s.conflicts().is_empty());
        assert_eq!(s.resolve(0, 0).unwrap_err().code(), "invalid_state");
    }

    #[test]
    fn undo_restores_and_empty_undo_fails() {
        let mut s = ResolutionSession::new(fixture_routes(), None, weights(), 2).unwrap();
        assert_eq!(s.undo().unwrap_err().code(), "invalid_state");
        let before = s.state().clone();
        s.resolve(0, 1).unwrap();
        s.undo().unwrap();
        assert_eq!(s.state(), &before);
    }

    #[test]
    fn inactive_conflict_rejected() {
        let mut s = ResolutionSession::new(fixture_routes(), None, weights(), 2).unwrap();
        assert_eq!(s.resolve(1, 0).unwrap_err().code(), "invalid_state");
    }

    #[test]
    fn disjoint_interiors_stop_merging() {
        let routes = vec![route("a", "o-1-d", 1.0), route("b", "o-2-d", 2.0), route("c", "o-3-d", 3.0)];
        let s = ResolutionSession::new(routes, None, weights(), 2).unwrap();
        assert_eq!(s.clusters().len(), 3);
    }

    #[test]
    fn single_route_is_one_final_cluster() {
        let s = ResolutionSession::new(vec![route("a", "1-2-3", 1.0)], None, weights(), 4).unwrap();
        assert_eq!(s.clusters().len(), 1);
        assert!(s.is_final());
        assert!(s.conflicts().is_empty());
    }

    #[test]
    fn five_numbers_interpolate() {
        assert_eq!(five_numbers(&[1.0, 2.0, 3.0, 4.0, 5.0]), [1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(five_numbers(&[2.0]), [2.0; 5]);
        assert_eq!(five_numbers(&[0.0, 1.0]), [0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn contradictory_orders_rejected() {
        let routes = vec![route("a", "1-2-3", 1.0), route("b", "1-3-2", 1.0)];
        let err = ResolutionSession::new(routes, None, weights(), 2).unwrap_err();
        assert_eq!(err.code(), "alignment_error");
    }

    #[test]
    fn view_serializes_wildcards() {
        let s = ResolutionSession::new(fixture_routes(), None, weights(), 2).unwrap();
        let json = serde_json::to_value(s.view()).unwrap();
        assert_eq!(json["clusters"][0]["pattern"], serde_json::json!(["1", "3", "*", "5"]));
        assert_eq!(json["markers"]["1"], "resolved");
        assert_eq!(json["conflicts"][0]["status"], "active");
    }
}
