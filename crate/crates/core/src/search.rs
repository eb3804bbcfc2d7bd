//! Pareto route search: a Monte-Carlo tree search over route prefixes.
//!
//! Each cycle selects a frontier node by UCB, expands its best `k` unexpanded
//! successors by estimated gain, completes one route per new child by weighted
//! random simulation (in parallel), and merges the routes into the Pareto archive.
//! Prefix subspaces whose bounds miss the requested criterion ranges are pruned.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{
    dominates, CostParams, CriteriaError, Criterion, CriterionRanges, CriterionVector, Evaluator,
    PrefixStats,
};
use crate::graph::{GraphError, StationEdit, StationGraph};
use crate::network::DemandMatrix;

/// Simulation attempts per child before giving up for the cycle.
pub const SIMULATION_ATTEMPTS: usize = 16;
/// Added to every normalised gain so that no feasible neighbour has zero probability.
pub const GAIN_FLOOR: f64 = 0.1;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("invalid search parameters: {0}")]
    Params(String),
    #[error("session is {status}: {action} not allowed")]
    State { status: SearchStatus, action: &'static str },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
}

impl SearchError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Params(_) => "invalid_parameter",
            Self::State { .. } => "invalid_state",
            Self::Graph(e) => e.code(),
            Self::Criteria(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Running,
    Paused,
    Exhausted,
    Stopped,
}

impl std::fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Running => "running",
            Self::Paused => "paused",
            Self::Exhausted => "exhausted",
            Self::Stopped => "stopped",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    /// UCB exploration constant.
    pub exploration: f64,
    /// Successors expanded (and simulated) per cycle.
    pub parallel: usize,
    /// Random seed; drawn from the OS when absent.
    pub seed: Option<u64>,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            exploration: std::f64::consts::SQRT_2,
            parallel: 4,
            seed: None,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.exploration >= 0.0 && self.exploration.is_finite()) {
            return Err(SearchError::Params(format!(
                "exploration must be a non-negative number, got {}",
                self.exploration
            )));
        }
        if self.parallel == 0 {
            return Err(SearchError::Params("parallel must be at least 1".into()));
        }
        Ok(())
    }
}

/// UCB score of a child; unvisited children score `+∞`.
pub fn ucb_score(hits: u64, visits: u64, parent_visits: u64, exploration: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    let v = visits as f64;
    hits as f64 / v + exploration * ((parent_visits.max(1) as f64).ln() / v).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoRoute {
    pub id: u64,
    /// Stop-space indices from origin to destination.
    pub stops: Vec<usize>,
    pub criteria: CriterionVector,
}

/// Mutually non-dominating routes without duplicate stop sequences.
#[derive(Debug, Clone, Default)]
pub struct ParetoSet {
    routes: Vec<ParetoRoute>,
    next_id: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InsertOutcome {
    pub admitted: Option<u64>,
    pub evicted: Vec<ParetoRoute>,
}

impl ParetoSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn routes(&self) -> &[ParetoRoute] {
        &self.routes
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn contains_stops(&self, stops: &[usize]) -> bool {
        self.routes.iter().any(|r| r.stops == stops)
    }

    /// Admits a route unless it duplicates or is dominated by an incumbent; evicts
    /// the incumbents it dominates.
    pub fn insert(&mut self, stops: Vec<usize>, criteria: CriterionVector) -> InsertOutcome {
        if self.contains_stops(&stops) || self.routes.iter().any(|r| dominates(&r.criteria, &criteria)) {
            return InsertOutcome::default();
        }
        let (evicted, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut self.routes)
            .into_iter()
            .partition(|r| dominates(&criteria, &r.criteria));
        self.routes = kept;
        let id = self.next_id;
        self.next_id += 1;
        self.routes.push(ParetoRoute { id, stops, criteria });
        InsertOutcome {
            admitted: Some(id),
            evicted,
        }
    }
}

#[derive(Debug, Clone)]
struct TreeNode {
    parent: Option<usize>,
    children: BTreeMap<usize, usize>,
    /// Local graph nodes from the origin to this node.
    path: Vec<usize>,
    stats: PrefixStats,
    visits: u64,
    hits: u64,
    pruned: BTreeSet<usize>,
    exhausted: bool,
    completed: bool,
}

/// Read-only view of a tree node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNodeView {
    pub prefix: Vec<String>,
    pub visits: u64,
    pub pareto_hits: u64,
    pub exhausted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSummary {
    pub id: u64,
    pub stops: Vec<String>,
    pub criteria: CriterionVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressSnapshot {
    /// Strictly increasing per session.
    pub seq: u64,
    pub iteration: u64,
    pub status: SearchStatus,
    pub pareto_count: usize,
    pub histograms: BTreeMap<String, Vec<u64>>,
    pub histogram_ranges: BTreeMap<String, [f64; 2]>,
    pub routes: Vec<RouteSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

/// Per-criterion histograms over the observed range of `values`.
pub fn histograms(values: &[CriterionVector]) -> (BTreeMap<String, Vec<u64>>, BTreeMap<String, [f64; 2]>) {
    let mut hist = BTreeMap::new();
    let mut ranges = BTreeMap::new();
    for c in Criterion::ALL {
        let mut bins = vec![0u64; HISTOGRAM_BINS];
        let xs: Vec<f64> = values.iter().map(|v| v.get(c)).collect();
        let (lo, hi) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        for &x in &xs {
            let i = if hi > lo {
                (((x - lo) / (hi - lo)) * HISTOGRAM_BINS as f64) as usize
            } else {
                0
            };
            bins[i.min(HISTOGRAM_BINS - 1)] += 1;
        }
        if !xs.is_empty() {
            ranges.insert(c.name().to_string(), [lo, hi]);
        }
        hist.insert(c.name().to_string(), bins);
    }
    (hist, ranges)
}

struct Candidate {
    stop: usize,
    stats: PrefixStats,
    gain: f64,
}

/// Normalised average gain of each candidate successor of `prefix`.
fn score_candidates(ev: &Evaluator, prefix: &mut Vec<usize>, stats: &PrefixStats, nexts: &[usize]) -> Vec<Candidate> {
    let base = ev.estimate(prefix, stats).to_array();
    let mut raw = Vec::with_capacity(nexts.len());
    for &e in nexts {
        let st = ev.extend(prefix, stats, e);
        prefix.push(e);
        let h = ev.estimate(prefix, &st).to_array();
        prefix.pop();
        let mut g = [0.0; 5];
        for c in Criterion::ALL {
            g[c.index()] = c.sign() * (h[c.index()] - base[c.index()]);
        }
        raw.push((e, st, g));
    }
    let mut lo = [f64::INFINITY; 5];
    let mut hi = [f64::NEG_INFINITY; 5];
    for (_, _, g) in &raw {
        for i in 0..5 {
            lo[i] = lo[i].min(g[i]);
            hi[i] = hi[i].max(g[i]);
        }
    }
    raw.into_iter()
        .map(|(stop, stats, g)| {
            let mut sum = 0.0;
            for i in 0..5 {
                if hi[i] > lo[i] {
                    sum += (g[i] - lo[i]) / (hi[i] - lo[i]);
                }
            }
            Candidate {
                stop,
                stats,
                gain: sum / 5.0,
            }
        })
        .collect()
}

/// Completes `prefix` to the destination by gain-weighted random choice.
fn simulate(
    ev: &Evaluator,
    ranges: &CriterionRanges,
    prefix: &[usize],
    stats: &PrefixStats,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<usize>> {
    let graph = ev.graph();
    let dest = graph.destination();
    'attempt: for _ in 0..SIMULATION_ATTEMPTS {
        let mut path = prefix.to_vec();
        let mut st = stats.clone();
        while st.last != dest {
            let nexts = graph.successors(st.last);
            let mut cands = score_candidates(ev, &mut path, &st, nexts);
            if !ranges.is_empty() {
                cands.retain(|c| ranges.overlaps(&ev.additive_bounds(&c.stats)));
            }
            if cands.is_empty() {
                continue 'attempt;
            }
            let total: f64 = cands.iter().map(|c| c.gain + GAIN_FLOOR).sum();
            let mut x = rng.random::<f64>() * total;
            let mut pick = cands.len() - 1;
            for (i, c) in cands.iter().enumerate() {
                x -= c.gain + GAIN_FLOOR;
                if x < 0.0 {
                    pick = i;
                    break;
                }
            }
            let chosen = cands.swap_remove(pick);
            path.push(chosen.stop);
            st = chosen.stats;
        }
        return Some(path);
    }
    None
}

#[derive(Debug, Clone)]
pub struct SearchSession {
    evaluator: Arc<Evaluator>,
    demand: Arc<DemandMatrix>,
    params: SearchParams,
    seed: u64,
    ranges: CriterionRanges,
    status: SearchStatus,
    iteration: u64,
    seq: u64,
    simulations: u64,
    tree: Vec<TreeNode>,
    pareto: ParetoSet,
    rng: ChaCha8Rng,
}

impl SearchSession {
    pub fn new(
        graph: Arc<StationGraph>,
        demand: Arc<DemandMatrix>,
        cost: CostParams,
        params: SearchParams,
        ranges: CriterionRanges,
    ) -> Result<Self, SearchError> {
        params.validate()?;
        if graph.is_empty() {
            return Err(SearchError::Params("station graph is empty".into()));
        }
        let evaluator = Arc::new(Evaluator::new(graph, &demand, cost)?);
        let seed = params.seed.unwrap_or_else(|| rand::rng().next_u64());
        let mut session = Self {
            evaluator,
            demand,
            params,
            seed,
            ranges,
            status: SearchStatus::Paused,
            iteration: 0,
            seq: 0,
            simulations: 0,
            tree: Vec::new(),
            pareto: ParetoSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        session.tree.push(session.root_node());
        Ok(session)
    }

    fn root_node(&self) -> TreeNode {
        let g = self.graph();
        TreeNode {
            parent: None,
            children: BTreeMap::new(),
            path: vec![g.origin()],
            stats: self.evaluator.root_stats(),
            visits: 0,
            hits: 0,
            pruned: BTreeSet::new(),
            exhausted: g.len() == 1,
            completed: false,
        }
    }

    pub fn graph(&self) -> &Arc<StationGraph> {
        self.evaluator.graph()
    }

    pub fn evaluator(&self) -> &Arc<Evaluator> {
        &self.evaluator
    }

    pub fn params(&self) -> &SearchParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn ranges(&self) -> &CriterionRanges {
        &self.ranges
    }

    pub fn status(&self) -> SearchStatus {
        self.status
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Simulations run so far.
    pub fn simulations(&self) -> u64 {
        self.simulations
    }

    pub fn pareto(&self) -> &ParetoSet {
        &self.pareto
    }

    pub fn tree_size(&self) -> usize {
        self.tree.len()
    }

    pub fn resume(&mut self) -> Result<(), SearchError> {
        match self.status {
            SearchStatus::Paused | SearchStatus::Running => {
                self.status = SearchStatus::Running;
                Ok(())
            }
            status => Err(SearchError::State { status, action: "resume" }),
        }
    }

    pub fn pause(&mut self) -> Result<(), SearchError> {
        match self.status {
            SearchStatus::Paused | SearchStatus::Running => {
                self.status = SearchStatus::Paused;
                Ok(())
            }
            status => Err(SearchError::State { status, action: "pause" }),
        }
    }

    /// Stops the session for good; stopping an exhausted session keeps it exhausted.
    pub fn stop(&mut self) {
        if self.status != SearchStatus::Exhausted {
            self.status = SearchStatus::Stopped;
        }
    }

    /// Runs up to `iterations` cycles, ending early on exhaustion.
    pub fn step(&mut self, iterations: u64) -> Result<ProgressSnapshot, SearchError> {
        if self.status != SearchStatus::Running {
            return Err(SearchError::State {
                status: self.status,
                action: "step",
            });
        }
        for _ in 0..iterations {
            if self.tree[0].exhausted {
                break;
            }
            self.cycle();
        }
        if self.tree[0].exhausted {
            self.status = SearchStatus::Exhausted;
        }
        Ok(self.snapshot())
    }

    /// Resumes and steps until exhaustion or `max_iterations`.
    pub fn run_to_exhaustion(&mut self, max_iterations: u64) -> Result<ProgressSnapshot, SearchError> {
        self.resume()?;
        self.step(max_iterations)
    }

    fn cycle(&mut self) {
        self.iteration += 1;
        let Some(node) = self.select() else {
            return;
        };
        let children = self.expand(node);
        if children.is_empty() {
            self.update_exhaustion(node);
            return;
        }
        let seeds: Vec<u64> = children.iter().map(|_| self.rng.next_u64()).collect();
        let ev = &self.evaluator;
        let ranges = &self.ranges;
        let jobs: Vec<(&[usize], &PrefixStats, u64)> = children
            .iter()
            .zip(&seeds)
            .map(|(&c, &s)| (self.tree[c].path.as_slice(), &self.tree[c].stats, s))
            .collect();
        let routes: Vec<Option<Vec<usize>>> = if jobs.len() > 1 {
            jobs.par_iter()
                .map(|&(p, st, s)| simulate(ev, ranges, p, st, &mut ChaCha8Rng::seed_from_u64(s)))
                .collect()
        } else {
            jobs.iter()
                .map(|&(p, st, s)| simulate(ev, ranges, p, st, &mut ChaCha8Rng::seed_from_u64(s)))
                .collect()
        };
        self.simulations += routes.len() as u64;
        let mut batch = Vec::new();
        for (&child, route) in children.iter().zip(routes) {
            let mut at = Some(child);
            while let Some(i) = at {
                self.tree[i].visits += 1;
                at = self.tree[i].parent;
            }
            if let Some(route) = route {
                self.tree[child].completed = true;
                batch.push(route);
            }
        }
        self.backpropagate(batch);
        for &child in &children {
            self.update_exhaustion(child);
        }
    }

    fn has_open_successor(&self, node: usize) -> bool {
        let n = &self.tree[node];
        let local = *n.path.last().expect("non-empty");
        self.graph()
            .successors(local)
            .iter()
            .any(|&s| {
                let stop = self.graph().stop_of(s);
                !n.children.contains_key(&stop) && !n.pruned.contains(&stop)
            })
    }

    fn select(&mut self) -> Option<usize> {
        let mut node = 0;
        loop {
            if self.tree[node].exhausted {
                return None;
            }
            if self.has_open_successor(node) {
                return Some(node);
            }
            let parent_visits = self.tree[node].visits;
            let best = self.tree[node]
                .children
                .values()
                .copied()
                .filter(|&c| !self.tree[c].exhausted)
                .map(|c| {
                    let n = &self.tree[c];
                    (c, ucb_score(n.hits, n.visits, parent_visits, self.params.exploration))
                })
                .fold(None::<(usize, f64)>, |best, (c, s)| match best {
                    Some((_, bs)) if bs >= s => best,
                    _ => Some((c, s)),
                });
            match best {
                Some((c, _)) => node = c,
                None => {
                    self.update_exhaustion(node);
                    return None;
                }
            }
        }
    }

    fn expand(&mut self, node: usize) -> Vec<usize> {
        let graph = Arc::clone(self.graph());
        let ev = Arc::clone(&self.evaluator);
        let (mut path, stats) = (self.tree[node].path.clone(), self.tree[node].stats.clone());
        let last = *path.last().expect("non-empty");
        let open: Vec<usize> = graph
            .successors(last)
            .iter()
            .copied()
            .filter(|&s| {
                let stop = graph.stop_of(s);
                !self.tree[node].children.contains_key(&stop) && !self.tree[node].pruned.contains(&stop)
            })
            .collect();
        let mut cands = score_candidates(&ev, &mut path, &stats, &open);
        if !self.ranges.is_empty() {
            let ranges = self.ranges;
            let (keep, prune): (Vec<_>, Vec<_>) = cands.into_iter().partition(|c| {
                path.push(c.stop);
                let ok = ranges.overlaps(&ev.bounds(&path, &c.stats));
                path.pop();
                ok
            });
            for c in prune {
                self.tree[node].pruned.insert(graph.stop_of(c.stop));
            }
            cands = keep;
        }
        cands.sort_by(|a, b| b.gain.total_cmp(&a.gain).then(a.stop.cmp(&b.stop)));
        cands.truncate(self.params.parallel);
        let mut created = Vec::with_capacity(cands.len());
        for c in cands {
            let mut child_path = path.clone();
            child_path.push(c.stop);
            let stop = graph.stop_of(c.stop);
            let id = self.tree.len();
            let prefix = self.stops_of(&child_path);
            let hits = self
                .pareto
                .routes()
                .iter()
                .filter(|r| r.stops.starts_with(&prefix))
                .count() as u64;
            self.tree.push(TreeNode {
                parent: Some(node),
                children: BTreeMap::new(),
                path: child_path,
                stats: c.stats,
                visits: 0,
                hits,
                pruned: BTreeSet::new(),
                exhausted: false,
                completed: false,
            });
            self.tree[node].children.insert(stop, id);
            created.push(id);
        }
        created
    }

    fn stops_of(&self, path: &[usize]) -> Vec<usize> {
        path.iter().map(|&n| self.graph().stop_of(n)).collect()
    }

    /// Evaluates candidate routes and merges them into the archive in order.
    fn backpropagate(&mut self, batch: Vec<Vec<usize>>) {
        for route in batch {
            let Ok(v) = self.evaluator.evaluate_route(&route) else {
                continue;
            };
            if !self.ranges.contains(&v) {
                continue;
            }
            let stops = self.stops_of(&route);
            let outcome = self.pareto.insert(stops.clone(), v);
            if outcome.admitted.is_some() {
                self.adjust_hits(&stops, 1);
                for r in &outcome.evicted {
                    self.adjust_hits(&r.stops, -1);
                }
            }
        }
    }

    fn adjust_hits(&mut self, stops: &[usize], delta: i64) {
        let mut node = 0;
        let apply = |n: &mut TreeNode| n.hits = n.hits.checked_add_signed(delta).expect("hit count underflow");
        apply(&mut self.tree[0]);
        for stop in &stops[1..] {
            match self.tree[node].children.get(stop) {
                Some(&c) => {
                    apply(&mut self.tree[c]);
                    node = c;
                }
                None => break,
            }
        }
    }

    fn node_exhausted(&self, node: usize) -> bool {
        let n = &self.tree[node];
        let last = *n.path.last().expect("non-empty");
        let graph = self.graph();
        if last == graph.destination() {
            return true;
        }
        if n.completed && graph.paths_to_dest(last) == 1.0 {
            return true;
        }
        !self.has_open_successor(node) && n.children.values().all(|&c| self.tree[c].exhausted)
    }

    fn update_exhaustion(&mut self, node: usize) {
        let mut at = Some(node);
        while let Some(i) = at {
            if self.tree[i].exhausted || !self.node_exhausted(i) {
                break;
            }
            self.tree[i].exhausted = true;
            at = self.tree[i].parent;
        }
    }

    /// Adds and removes candidate stops, keeping the parts of the tree and archive
    /// that remain valid.
    pub fn edit_stations(&mut self, edit: &StationEdit) -> Result<(), SearchError> {
        if matches!(self.status, SearchStatus::Exhausted | SearchStatus::Stopped) {
            return Err(SearchError::State {
                status: self.status,
                action: "edit",
            });
        }
        let graph = Arc::new(self.graph().edit(edit)?);
        let evaluator = Arc::new(Evaluator::new(Arc::clone(&graph), &self.demand, *self.evaluator.cost())?);
        self.evaluator = evaluator;

        let old = std::mem::take(&mut self.tree);
        let mut root = self.root_node();
        root.visits = old[0].visits;
        self.tree.push(root);
        let mut queue = vec![(0usize, 0usize)];
        while let Some((old_id, new_id)) = queue.pop() {
            let parent_local = *self.tree[new_id].path.last().expect("non-empty");
            for (&stop, &old_child) in &old[old_id].children {
                let Some(local) = graph.node_of(stop) else {
                    continue;
                };
                if !graph.has_edge(parent_local, local) {
                    continue;
                }
                let parent = &self.tree[new_id];
                let mut path = parent.path.clone();
                let stats = self.evaluator.extend(&path, &parent.stats, local);
                path.push(local);
                let id = self.tree.len();
                self.tree.push(TreeNode {
                    parent: Some(new_id),
                    children: BTreeMap::new(),
                    path,
                    stats,
                    visits: old[old_child].visits,
                    hits: 0,
                    pruned: BTreeSet::new(),
                    exhausted: false,
                    completed: false,
                });
                self.tree[new_id].children.insert(stop, id);
                queue.push((old_child, id));
            }
        }

        // Criteria depend on the graph, so surviving archive routes and complete
        // routes in the tree are re-evaluated and re-filtered from scratch.
        let mut pool: Vec<Vec<usize>> = self.pareto.routes().iter().map(|r| r.stops.clone()).collect();
        for n in &self.tree {
            if *n.path.last().expect("non-empty") == graph.destination() {
                pool.push(self.stops_of(&n.path));
            }
        }
        let mut archive = ParetoSet {
            routes: Vec::new(),
            next_id: self.pareto.next_id,
        };
        let old_ids: BTreeMap<Vec<usize>, u64> =
            self.pareto.routes().iter().map(|r| (r.stops.clone(), r.id)).collect();
        for stops in pool {
            let local: Option<Vec<usize>> = stops.iter().map(|&s| graph.node_of(s)).collect();
            let Some(local) = local else { continue };
            let Ok(v) = self.evaluator.evaluate_route(&local) else {
                continue;
            };
            if self.ranges.contains(&v) {
                archive.insert(stops, v);
            }
        }
        // Keep identifiers stable for routes that survive unchanged.
        for r in &mut archive.routes {
            if let Some(&id) = old_ids.get(&r.stops) {
                r.id = id;
            }
        }
        self.pareto = archive;
        self.recompute_hits();
        // Children always follow their parent in the arena.
        for i in (0..self.tree.len()).rev() {
            self.tree[i].exhausted = self.node_exhausted(i);
        }
        Ok(())
    }

    fn recompute_hits(&mut self) {
        for n in &mut self.tree {
            n.hits = 0;
        }
        let routes: Vec<Vec<usize>> = self.pareto.routes().iter().map(|r| r.stops.clone()).collect();
        for stops in routes {
            self.adjust_hits(&stops, 1);
        }
    }

    /// One simulated route from the origin, as local graph nodes.
    pub fn sample_route(&self, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
        let root = &self.tree[0];
        simulate(&self.evaluator, &self.ranges, &root.path, &root.stats, rng)
    }

    /// Prefix, visits and hits of every tree node.
    pub fn tree_view(&self) -> Vec<TreeNodeView> {
        self.tree
            .iter()
            .map(|n| TreeNodeView {
                prefix: n.path.iter().map(|&l| self.graph().stop_id(l).to_string()).collect(),
                visits: n.visits,
                pareto_hits: n.hits,
                exhausted: n.exhausted,
            })
            .collect()
    }

    pub fn route_summaries(&self) -> Vec<RouteSummary> {
        let space = self.graph().space();
        self.pareto
            .routes()
            .iter()
            .map(|r| RouteSummary {
                id: r.id,
                stops: r.stops.iter().map(|&s| space.stop(s).stop_id.clone()).collect(),
                criteria: r.criteria,
            })
            .collect()
    }

    pub fn snapshot(&mut self) -> ProgressSnapshot {
        self.seq += 1;
        let values: Vec<CriterionVector> = self.pareto.routes().iter().map(|r| r.criteria).collect();
        let (histograms, histogram_ranges) = histograms(&values);
        ProgressSnapshot {
            seq: self.seq,
            iteration: self.iteration,
            status: self.status,
            pareto_count: self.pareto.len(),
            histograms,
            histogram_ranges,
            routes: self.route_summaries(),
            timestamp: Some(Utc::now()),
        }
    }
}
