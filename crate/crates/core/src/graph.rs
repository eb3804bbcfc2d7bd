//! Directed acyclic station graphs between anchored stop sets.
//!
//! A graph is assembled from one segment per pair of consecutive anchor sets. Each
//! segment admits an edge `u -> v` when the road distance between the two stops is
//! inside the spacing band and `v` is sufficiently closer to the segment target
//! than `u`. Strict progress toward the target keeps every segment acyclic; stops
//! inside one anchor set are chained in the given order.
//!
//! Local node indices are topological positions, so the origin is node `0` and
//! the destination is the last node.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::cmp::{Ordering, Reverse};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::geo::haversine_km;
use crate::network::{BusNetwork, Stop, StopIdx};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid graph parameters: {0}")]
    Params(String),
    #[error("invalid anchors: {0}")]
    Anchors(String),
    #[error("unknown stop `{0}`")]
    UnknownStop(String),
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("no feasible path from `{from}` to `{to}` (segment {segment}): {candidates} candidate stops, {reachable} reachable from the source")]
    Empty {
        segment: usize,
        from: String,
        to: String,
        candidates: usize,
        reachable: usize,
    },
}

impl GraphError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Params(_) => "invalid_parameter",
            Self::Anchors(_) => "invalid_anchors",
            Self::UnknownStop(_) => "unknown_stop",
            Self::Constraint(_) => "constraint_violation",
            Self::Empty { .. } => "empty_graph",
        }
    }
}

/// Edge feasibility parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphParams {
    pub min_spacing_km: f64,
    pub max_spacing_km: f64,
    /// Fraction of `min_spacing_km` an edge may give back; each edge must gain at
    /// least `min_spacing_km × (1 − progress_slack)` toward the target.
    pub progress_slack: f64,
    /// Optional corridor: a stop is a candidate only if its detour
    /// `D(s, x) + D(x, t)` is at most this multiple of `D(s, t)`.
    pub corridor: Option<f64>,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            min_spacing_km: 0.3,
            max_spacing_km: 2.0,
            progress_slack: 0.5,
            corridor: None,
        }
    }
}

impl GraphParams {
    pub fn validate(&self) -> Result<(), GraphError> {
        let ok = self.min_spacing_km > 0.0
            && self.min_spacing_km < self.max_spacing_km
            && self.max_spacing_km.is_finite();
        if !ok {
            return Err(GraphError::Params(format!(
                "need 0 < min_spacing ({}) < max_spacing ({})",
                self.min_spacing_km, self.max_spacing_km
            )));
        }
        if !(0.0..1.0).contains(&self.progress_slack) {
            return Err(GraphError::Params(format!(
                "progress_slack must lie in [0, 1), got {}",
                self.progress_slack
            )));
        }
        if let Some(c) = self.corridor {
            if c.is_nan() || c < 1.0 {
                return Err(GraphError::Params(format!("corridor must be >= 1, got {c}")));
            }
        }
        Ok(())
    }

    fn min_progress(&self) -> f64 {
        self.min_spacing_km * (1.0 - self.progress_slack)
    }
}

/// The stops a graph may draw from: the network's stops followed by stops added
/// interactively. Indices below `network.stops().len()` are network stops.
#[derive(Debug, Clone)]
pub struct StopSpace {
    network: Arc<BusNetwork>,
    extra: Vec<Stop>,
    extra_lookup: HashMap<String, usize>,
}

impl StopSpace {
    pub fn new(network: Arc<BusNetwork>) -> Self {
        Self {
            network,
            extra: Vec::new(),
            extra_lookup: HashMap::new(),
        }
    }

    pub fn network(&self) -> &Arc<BusNetwork> {
        &self.network
    }

    pub fn len(&self) -> usize {
        self.network.stops().len() + self.extra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stop(&self, i: usize) -> &Stop {
        let n = self.network.stops().len();
        if i < n {
            self.network.stop(i)
        } else {
            &self.extra[i - n]
        }
    }

    /// The network stop index, if `i` is a network stop.
    pub fn network_index(&self, i: usize) -> Option<StopIdx> {
        (i < self.network.stops().len()).then_some(i)
    }

    pub fn lookup(&self, stop_id: &str) -> Option<usize> {
        self.network
            .stop_index(stop_id)
            .or_else(|| self.extra_lookup.get(stop_id).copied())
    }

    pub fn road_distance(&self, a: usize, b: usize) -> f64 {
        let n = self.network.stops().len();
        if a < n && b < n {
            self.network.road_distance(a, b)
        } else if a == b {
            0.0
        } else {
            haversine_km(self.stop(a).position(), self.stop(b).position())
                * self.network.road_distances().detour_factor
        }
    }

    fn with_stop(&self, stop: Stop) -> (Self, usize) {
        let mut next = self.clone();
        let idx = next.len();
        next.extra_lookup.insert(stop.stop_id.clone(), idx);
        next.extra.push(stop);
        (next, idx)
    }
}

/// A stop to add during an interactive edit: an existing stop id, or a new stop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AddStop {
    Existing(String),
    New(Stop),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StationEdit {
    pub add: Vec<AddStop>,
    pub remove: Vec<String>,
}

#[derive(Debug, Clone)]
struct Segment {
    source: usize,
    target: usize,
    candidates: BTreeSet<usize>,
    succ: BTreeMap<usize, BTreeSet<usize>>,
}

/// Comparable view of a graph: node ids in topological order, edges and path counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStructure {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub paths_to_dest: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StationGraph {
    space: Arc<StopSpace>,
    params: GraphParams,
    anchors: Vec<Vec<usize>>,
    excluded: BTreeSet<usize>,
    segments: Vec<Segment>,

    nodes: Vec<usize>,
    local: HashMap<usize, usize>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    road: Vec<f64>,
    transit: Vec<f64>,
    paths_to_dest: Vec<f64>,
    paths_between: Vec<f64>,
}

impl StationGraph {
    /// Graph between an origin and a destination stop of `network`.
    pub fn build(
        network: Arc<BusNetwork>,
        origin: &str,
        destination: &str,
        params: GraphParams,
    ) -> Result<Self, GraphError> {
        Self::build_anchored(
            network,
            &[vec![origin.to_string()], vec![destination.to_string()]],
            params,
        )
    }

    /// Graph whose every origin→destination path visits all anchor stops in order.
    pub fn build_anchored(
        network: Arc<BusNetwork>,
        stop_sets: &[Vec<String>],
        params: GraphParams,
    ) -> Result<Self, GraphError> {
        let space = Arc::new(StopSpace::new(network));
        let anchors = resolve_anchors(&space, stop_sets)?;
        Self::build_in_space(space, anchors, params, BTreeSet::new())
    }

    /// Full build over a stop space with some stops excluded.
    pub fn build_in_space(
        space: Arc<StopSpace>,
        anchors: Vec<Vec<usize>>,
        params: GraphParams,
        excluded: BTreeSet<usize>,
    ) -> Result<Self, GraphError> {
        params.validate()?;
        check_anchor_shape(&space, &anchors)?;
        let anchor_set: HashSet<usize> = anchors.iter().flatten().copied().collect();
        let segments = anchors
            .windows(2)
            .map(|pair| {
                let source = *pair[0].last().expect("anchor sets are non-empty");
                let target = pair[1][0];
                let mut seg = Segment {
                    source,
                    target,
                    candidates: BTreeSet::new(),
                    succ: BTreeMap::new(),
                };
                seg.candidates.insert(source);
                seg.candidates.insert(target);
                for x in 0..space.len() {
                    if !anchor_set.contains(&x)
                        && !excluded.contains(&x)
                        && is_candidate(&space, &params, &seg, x)
                    {
                        seg.candidates.insert(x);
                    }
                }
                let cands: Vec<usize> = seg.candidates.iter().copied().collect();
                for &u in &cands {
                    for &v in &cands {
                        if edge_ok(&space, &params, &seg, u, v) {
                            seg.succ.entry(u).or_default().insert(v);
                        }
                    }
                }
                seg
            })
            .collect();
        let mut graph = Self::empty(space, params, anchors, excluded, segments);
        graph.finalize()?;
        Ok(graph)
    }

    fn empty(
        space: Arc<StopSpace>,
        params: GraphParams,
        anchors: Vec<Vec<usize>>,
        excluded: BTreeSet<usize>,
        segments: Vec<Segment>,
    ) -> Self {
        Self {
            space,
            params,
            anchors,
            excluded,
            segments,
            nodes: Vec::new(),
            local: HashMap::new(),
            succ: Vec::new(),
            pred: Vec::new(),
            road: Vec::new(),
            transit: Vec::new(),
            paths_to_dest: Vec::new(),
            paths_between: Vec::new(),
        }
    }

    /// Applies stop additions and removals, updating only the affected candidate
    /// edges before re-deriving the graph.
    pub fn edit(&self, edit: &StationEdit) -> Result<Self, GraphError> {
        let anchor_set: HashSet<usize> = self.anchors.iter().flatten().copied().collect();
        let mut space = Arc::clone(&self.space);
        let mut excluded = self.excluded.clone();
        let mut removed = BTreeSet::new();
        for id in &edit.remove {
            let idx = space
                .lookup(id)
                .ok_or_else(|| GraphError::UnknownStop(id.clone()))?;
            if anchor_set.contains(&idx) {
                return Err(GraphError::Constraint(format!(
                    "stop `{id}` is an origin, destination or anchor and cannot be removed"
                )));
            }
            excluded.insert(idx);
            removed.insert(idx);
        }
        let mut added = BTreeSet::new();
        for add in &edit.add {
            let idx = match add {
                AddStop::Existing(id) => space
                    .lookup(id)
                    .ok_or_else(|| GraphError::UnknownStop(id.clone()))?,
                AddStop::New(stop) => match space.lookup(&stop.stop_id) {
                    Some(idx) => {
                        let known = space.stop(idx);
                        if known.lat != stop.lat || known.lon != stop.lon {
                            return Err(GraphError::Constraint(format!(
                                "stop id `{}` already exists at a different position",
                                stop.stop_id
                            )));
                        }
                        idx
                    }
                    None => {
                        if !stop.position().is_valid() {
                            return Err(GraphError::Constraint(format!(
                                "stop `{}` has invalid coordinates",
                                stop.stop_id
                            )));
                        }
                        let (next, idx) = space.with_stop(stop.clone());
                        space = Arc::new(next);
                        idx
                    }
                },
            };
            if excluded.remove(&idx) || !self.is_known(idx) {
                added.insert(idx);
            }
            removed.remove(&idx);
        }

        let mut segments = self.segments.clone();
        for seg in &mut segments {
            for &x in &removed {
                if seg.candidates.remove(&x) {
                    seg.succ.remove(&x);
                    for targets in seg.succ.values_mut() {
                        targets.remove(&x);
                    }
                }
            }
            for &x in &added {
                if anchor_set.contains(&x)
                    || seg.candidates.contains(&x)
                    || !is_candidate(&space, &self.params, seg, x)
                {
                    continue;
                }
                let others: Vec<usize> = seg.candidates.iter().copied().collect();
                for &v in &others {
                    if edge_ok(&space, &self.params, seg, x, v) {
                        seg.succ.entry(x).or_default().insert(v);
                    }
                    if edge_ok(&space, &self.params, seg, v, x) {
                        seg.succ.entry(v).or_default().insert(x);
                    }
                }
                seg.candidates.insert(x);
            }
        }
        let mut graph = Self::empty(space, self.params, self.anchors.clone(), excluded, segments);
        graph.finalize()?;
        Ok(graph)
    }

    /// Rebuilds from scratch with the same anchors, parameters, stop space and exclusions.
    pub fn rebuild(&self) -> Result<Self, GraphError> {
        Self::build_in_space(
            Arc::clone(&self.space),
            self.anchors.clone(),
            self.params,
            self.excluded.clone(),
        )
    }

    fn is_known(&self, idx: usize) -> bool {
        self.segments.iter().any(|s| s.candidates.contains(&idx))
    }

    fn finalize(&mut self) -> Result<(), GraphError> {
        let space = Arc::clone(&self.space);
        // Resolve stops feasible in several segments: each keeps the segment where
        // its detour is smallest. Iterate because dropping a stop can cut paths.
        let mut allowed: Vec<BTreeSet<usize>> =
            self.segments.iter().map(|s| s.candidates.clone()).collect();
        let on_path = loop {
            let on_path: Vec<BTreeSet<usize>> = self
                .segments
                .iter()
                .zip(&allowed)
                .map(|(seg, allow)| segment_on_path(seg, allow))
                .collect();
            let mut owners: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (j, set) in on_path.iter().enumerate() {
                let seg = &self.segments[j];
                for &x in set {
                    if x != seg.source && x != seg.target {
                        owners.entry(x).or_default().push(j);
                    }
                }
            }
            let mut changed = false;
            for (x, segs) in owners.into_iter().filter(|(_, s)| s.len() > 1) {
                let detour = |j: usize| {
                    let seg = &self.segments[j];
                    space.road_distance(seg.source, x) + space.road_distance(x, seg.target)
                        - space.road_distance(seg.source, seg.target)
                };
                let best = *segs
                    .iter()
                    .min_by(|&&a, &&b| detour(a).total_cmp(&detour(b)).then(a.cmp(&b)))
                    .expect("non-empty");
                for j in segs.into_iter().filter(|&j| j != best) {
                    allowed[j].remove(&x);
                    changed = true;
                }
            }
            if !changed {
                break on_path;
            }
        };
        for (j, (seg, set)) in self.segments.iter().zip(&on_path).enumerate() {
            if !set.contains(&seg.target) {
                let reachable = reach_forward(seg, &allowed[j]).len();
                return Err(GraphError::Empty {
                    segment: j,
                    from: space.stop(seg.source).stop_id.clone(),
                    to: space.stop(seg.target).stop_id.clone(),
                    candidates: seg.candidates.len(),
                    reachable,
                });
            }
        }

        let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
        for set in &self.anchors {
            for w in set.windows(2) {
                edges.insert((w[0], w[1]));
            }
        }
        for (seg, set) in self.segments.iter().zip(&on_path) {
            for &u in set {
                if let Some(targets) = seg.succ.get(&u) {
                    for &v in targets.iter().filter(|v| set.contains(v)) {
                        edges.insert((u, v));
                    }
                }
            }
        }
        let mut members: BTreeSet<usize> = self.anchors.iter().flatten().copied().collect();
        members.extend(on_path.iter().flatten().copied());

        let destination = *self.anchors.last().and_then(|s| s.last()).expect("anchors");
        let order = topological_order(&space, &members, &edges, destination);
        let n = order.len();
        let local: HashMap<usize, usize> = order.iter().enumerate().map(|(i, &g)| (g, i)).collect();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        for &(u, v) in &edges {
            let (lu, lv) = (local[&u], local[&v]);
            succ[lu].push(lv);
            pred[lv].push(lu);
        }
        for list in succ.iter_mut().chain(pred.iter_mut()) {
            list.sort_unstable();
        }
        let mut road = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                road[i * n + j] = space.road_distance(order[i], order[j]);
            }
        }
        let (paths_to_dest, paths_between) = count_paths(&succ);
        let transit = transit_distances(&succ, &road);

        self.nodes = order;
        self.local = local;
        self.succ = succ;
        self.pred = pred;
        self.road = road;
        self.transit = transit;
        self.paths_to_dest = paths_to_dest;
        self.paths_between = paths_between;
        Ok(())
    }

    pub fn space(&self) -> &Arc<StopSpace> {
        &self.space
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    /// Anchor sets as stop-space indices.
    pub fn anchors(&self) -> &[Vec<usize>] {
        &self.anchors
    }

    pub fn excluded(&self) -> &BTreeSet<usize> {
        &self.excluded
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn origin(&self) -> usize {
        0
    }

    pub fn destination(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Stop-space index of a local node.
    pub fn stop_of(&self, node: usize) -> usize {
        self.nodes[node]
    }

    pub fn stop_id(&self, node: usize) -> &str {
        &self.space.stop(self.nodes[node]).stop_id
    }

    /// Local node (= topological index) of a stop-space index.
    pub fn node_of(&self, stop: usize) -> Option<usize> {
        self.local.get(&stop).copied()
    }

    pub fn node_by_id(&self, stop_id: &str) -> Option<usize> {
        self.space.lookup(stop_id).and_then(|s| self.node_of(s))
    }

    /// Stop-space indices in topological order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.succ[node]
    }

    pub fn predecessors(&self, node: usize) -> &[usize] {
        &self.pred[node]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.succ[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Road distance `D(u, v)` between local nodes, km.
    pub fn road_distance(&self, u: usize, v: usize) -> f64 {
        self.road[u * self.nodes.len() + v]
    }

    /// Shortest distance `δ(u, v)` through the graph, km; infinite when unreachable.
    pub fn transit_distance(&self, u: usize, v: usize) -> f64 {
        self.transit[u * self.nodes.len() + v]
    }

    /// Number of paths from `node` to the destination.
    pub fn paths_to_dest(&self, node: usize) -> f64 {
        self.paths_to_dest[node]
    }

    /// Number of paths from `u` to `v` (1 when `u == v`).
    pub fn paths_between(&self, u: usize, v: usize) -> f64 {
        self.paths_between[u * self.nodes.len() + v]
    }

    /// Whether a local node sequence is an origin→destination path.
    pub fn is_route(&self, route: &[usize]) -> bool {
        route.first() == Some(&self.origin())
            && route.last() == Some(&self.destination())
            && route.windows(2).all(|w| self.has_edge(w[0], w[1]))
    }

    /// Every anchor stop as a local node, in order.
    pub fn anchor_nodes(&self) -> Vec<usize> {
        self.anchors
            .iter()
            .flatten()
            .map(|s| self.local[s])
            .collect()
    }

    pub fn structure(&self) -> GraphStructure {
        let mut edges = Vec::with_capacity(self.edge_count());
        for (u, list) in self.succ.iter().enumerate() {
            for &v in list {
                edges.push((self.stop_id(u).to_string(), self.stop_id(v).to_string()));
            }
        }
        GraphStructure {
            nodes: (0..self.len()).map(|i| self.stop_id(i).to_string()).collect(),
            edges,
            paths_to_dest: self.paths_to_dest.clone(),
        }
    }

    /// Nodes and edges as a GeoJSON `FeatureCollection`.
    pub fn to_geojson(&self) -> Value {
        let anchors: HashSet<usize> = self.anchor_nodes().into_iter().collect();
        let mut features = Vec::with_capacity(self.len() + self.edge_count());
        for i in 0..self.len() {
            let s = self.space.stop(self.nodes[i]);
            features.push(json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [s.lon, s.lat]},
                "properties": {
                    "stop_id": s.stop_id,
                    "name": s.name,
                    "topo_index": i,
                    "paths_to_dest": self.paths_to_dest[i],
                    "anchor": anchors.contains(&i),
                },
            }));
        }
        for (u, list) in self.succ.iter().enumerate() {
            for &v in list {
                let (a, b) = (self.space.stop(self.nodes[u]), self.space.stop(self.nodes[v]));
                features.push(json!({
                    "type": "Feature",
                    "geometry": {"type": "LineString", "coordinates": [[a.lon, a.lat], [b.lon, b.lat]]},
                    "properties": {"from": a.stop_id, "to": b.stop_id, "km": self.road_distance(u, v)},
                }));
            }
        }
        json!({"type": "FeatureCollection", "features": features})
    }
}

fn resolve_anchors(space: &StopSpace, stop_sets: &[Vec<String>]) -> Result<Vec<Vec<usize>>, GraphError> {
    stop_sets
        .iter()
        .map(|set| {
            set.iter()
                .map(|id| space.lookup(id).ok_or_else(|| GraphError::UnknownStop(id.clone())))
                .collect()
        })
        .collect()
}

fn check_anchor_shape(space: &StopSpace, anchors: &[Vec<usize>]) -> Result<(), GraphError> {
    if anchors.len() < 2 {
        return Err(GraphError::Anchors("at least two stop sets are required".into()));
    }
    if anchors.iter().any(Vec::is_empty) {
        return Err(GraphError::Anchors("stop sets must be non-empty".into()));
    }
    let mut seen = HashSet::new();
    for &s in anchors.iter().flatten() {
        if s >= space.len() {
            return Err(GraphError::UnknownStop(s.to_string()));
        }
        if !seen.insert(s) {
            return Err(GraphError::Anchors(format!(
                "stop `{}` is anchored more than once (origin and destination must differ)",
                space.stop(s).stop_id
            )));
        }
    }
    Ok(())
}

fn is_candidate(space: &StopSpace, params: &GraphParams, seg: &Segment, x: usize) -> bool {
    let to_target = space.road_distance(x, seg.target);
    let span = space.road_distance(seg.source, seg.target);
    if to_target > span {
        return false;
    }
    match params.corridor {
        Some(c) => space.road_distance(seg.source, x) + to_target <= c * span,
        None => true,
    }
}

fn edge_ok(space: &StopSpace, params: &GraphParams, seg: &Segment, u: usize, v: usize) -> bool {
    if u == v || u == seg.target || v == seg.source {
        return false;
    }
    let d = space.road_distance(u, v);
    d >= params.min_spacing_km
        && d <= params.max_spacing_km
        && space.road_distance(v, seg.target)
            <= space.road_distance(u, seg.target) - params.min_progress()
}

fn reach_forward(seg: &Segment, allowed: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([seg.source]);
    let mut stack = vec![seg.source];
    while let Some(u) = stack.pop() {
        if let Some(targets) = seg.succ.get(&u) {
            for &v in targets {
                if allowed.contains(&v) && seen.insert(v) {
                    stack.push(v);
                }
            }
        }
    }
    seen
}

/// Stops lying on some source→target path using only `allowed` stops.
fn segment_on_path(seg: &Segment, allowed: &BTreeSet<usize>) -> BTreeSet<usize> {
    let forward = reach_forward(seg, allowed);
    if !forward.contains(&seg.target) {
        return BTreeSet::new();
    }
    let mut rev: HashMap<usize, Vec<usize>> = HashMap::new();
    for (&u, targets) in &seg.succ {
        if !forward.contains(&u) {
            continue;
        }
        for &v in targets {
            if forward.contains(&v) {
                rev.entry(v).or_default().push(u);
            }
        }
    }
    let mut back = BTreeSet::from([seg.target]);
    let mut stack = vec![seg.target];
    while let Some(v) = stack.pop() {
        if let Some(sources) = rev.get(&v) {
            for &u in sources {
                if back.insert(u) {
                    stack.push(u);
                }
            }
        }
    }
    back
}

/// Kahn's algorithm; among ready nodes the one farthest from the destination goes
/// first, then the smaller stop id.
fn topological_order(
    space: &StopSpace,
    members: &BTreeSet<usize>,
    edges: &BTreeSet<(usize, usize)>,
    destination: usize,
) -> Vec<usize> {
    #[derive(PartialEq)]
    struct Ready<'a> {
        dist: f64,
        id: &'a str,
        stop: usize,
    }
    impl Eq for Ready<'_> {}
    impl Ord for Ready<'_> {
        fn cmp(&self, other: &Self) -> Ordering {
            self.dist
                .total_cmp(&other.dist)
                .then_with(|| Reverse(self.id).cmp(&Reverse(other.id)))
        }
    }
    impl PartialOrd for Ready<'_> {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut indegree: HashMap<usize, usize> = members.iter().map(|&m| (m, 0)).collect();
    let mut out: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(u, v) in edges {
        *indegree.get_mut(&v).expect("edge endpoints are members") += 1;
        out.entry(u).or_default().push(v);
    }
    let ready = |s: usize| Ready {
        dist: space.road_distance(s, destination),
        id: &space.stop(s).stop_id,
        stop: s,
    };
    let mut heap: BinaryHeap<Ready> = members
        .iter()
        .filter(|m| indegree[m] == 0)
        .map(|&m| ready(m))
        .collect();
    let mut order = Vec::with_capacity(members.len());
    while let Some(Ready { stop, .. }) = heap.pop() {
        order.push(stop);
        for &v in out.get(&stop).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indegree.get_mut(&v).expect("member");
            *d -= 1;
            if *d == 0 {
                heap.push(ready(v));
            }
        }
    }
    debug_assert_eq!(order.len(), members.len(), "station graph must be acyclic");
    order
}

/// Path counts by reverse-topological dynamic programming over a graph whose node
/// indices are a topological order and whose last node is the destination.
///
/// Returns `(paths_to_dest, paths_between)` with `paths_between` row-major `n × n`.
/// Counts are exact while they stay below 2^53.
pub fn count_paths(succ: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
    let n = succ.len();
    let mut between = vec![0.0; n * n];
    for v in 0..n {
        between[v * n + v] = 1.0;
    }
    for u in (0..n).rev() {
        for &w in &succ[u] {
            debug_assert!(w > u, "node indices must be topological");
            for v in w..n {
                between[u * n + v] += between[w * n + v];
            }
        }
    }
    let to_dest = if n == 0 {
        Vec::new()
    } else {
        (0..n).map(|u| between[u * n + n - 1]).collect()
    };
    (to_dest, between)
}

fn transit_distances(succ: &[Vec<usize>], road: &[f64]) -> Vec<f64> {
    let n = succ.len();
    let mut dist = vec![f64::INFINITY; n * n];
    for s in 0..n {
        let row = &mut dist[s * n..(s + 1) * n];
        row[s] = 0.0;
        for u in s..n {
            let du = row[u];
            if du.is_infinite() {
                continue;
            }
            for &v in &succ[u] {
                let cand = du + road[u * n + v];
                if cand < row[v] {
                    row[v] = cand;
                }
            }
        }
    }
    dist
}
