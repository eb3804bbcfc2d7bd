//! Route criteria: exact evaluation of complete routes, fast estimates over route
//! subspaces (all completions of a prefix), and sound min/max bounds for pruning.
//!
//! Everything here works on local graph nodes, whose indices are topological.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::StationGraph;
use crate::network::DemandMatrix;

/// Dwell time charged per interior stop, hours.
pub const DWELL_HOURS: f64 = 2.0 / 60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error("invalid cost parameters: {0}")]
    Params(String),
    #[error("route is not a path of the station graph: {0}")]
    NotAPath(String),
    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),
    #[error("invalid criterion range: {0}")]
    Range(String),
    #[error("cannot read cost parameters: {0}")]
    Config(String),
}

impl CriteriaError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Params(_) | Self::Range(_) => "invalid_parameter",
            Self::NotAPath(_) => "invalid_route",
            Self::UnknownCriterion(_) => "unknown_criterion",
            Self::Config(_) => "invalid_config",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    ServiceTime,
    PassengerFlow,
    Directness,
    ConstructionCost,
    ServiceCost,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [
        Criterion::ServiceTime,
        Criterion::PassengerFlow,
        Criterion::Directness,
        Criterion::ConstructionCost,
        Criterion::ServiceCost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::ServiceTime => "service_time",
            Self::PassengerFlow => "passenger_flow",
            Self::Directness => "directness",
            Self::ConstructionCost => "construction_cost",
            Self::ServiceCost => "service_cost",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn maximize(self) -> bool {
        matches!(self, Self::PassengerFlow)
    }

    /// `+1` for criteria to maximise, `-1` for criteria to minimise.
    pub fn sign(self) -> f64 {
        if self.maximize() {
            1.0
        } else {
            -1.0
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = CriteriaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CriteriaError::UnknownCriterion(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CriterionVector {
    /// Hours.
    pub service_time: f64,
    /// Passengers.
    pub passenger_flow: f64,
    pub directness: f64,
    pub construction_cost: f64,
    pub service_cost: f64,
}

impl CriterionVector {
    pub fn get(&self, c: Criterion) -> f64 {
        self.to_array()[c.index()]
    }

    pub fn set(&mut self, c: Criterion, value: f64) {
        let mut a = self.to_array();
        a[c.index()] = value;
        *self = Self::from_array(a);
    }

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.service_time,
            self.passenger_flow,
            self.directness,
            self.construction_cost,
            self.service_cost,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            service_time: a[0],
            passenger_flow: a[1],
            directness: a[2],
            construction_cost: a[3],
            service_cost: a[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Pareto dominance: `a` is at least as good as `b` on every criterion and strictly
/// better on one.
pub fn dominates(a: &CriterionVector, b: &CriterionVector) -> bool {
    let mut strict = false;
    for c in Criterion::ALL {
        let (x, y) = (c.sign() * a.get(c), c.sign() * b.get(c));
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Per-stop construction cost.
    pub per_stop_cost: f64,
    /// Hours between departures.
    pub headway: f64,
    /// Daily operating hours.
    pub service_span: f64,
    /// Per hour.
    pub crew_wage: f64,
    /// Per km.
    pub fuel_cost: f64,
    /// Per km.
    pub maintenance_cost: f64,
    /// km/h.
    #[serde(default = "default_speed")]
    pub speed: f64,
}

fn default_speed() -> f64 {
    20.0
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            per_stop_cost: 50.0,
            headway: 0.25,
            service_span: 18.0,
            crew_wage: 30.0,
            fuel_cost: 1.2,
            maintenance_cost: 0.8,
            speed: default_speed(),
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<(), CriteriaError> {
        let fields = [
            ("per_stop_cost", self.per_stop_cost),
            ("headway", self.headway),
            ("service_span", self.service_span),
            ("crew_wage", self.crew_wage),
            ("fuel_cost", self.fuel_cost),
            ("maintenance_cost", self.maintenance_cost),
            ("speed", self.speed),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CriteriaError::Params(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self, CriteriaError> {
        let p: Self = toml::from_str(s).map_err(|e| CriteriaError::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_json_str(s: &str) -> Result<Self, CriteriaError> {
        let p: Self = serde_json::from_str(s).map_err(|e| CriteriaError::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, CriteriaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CriteriaError::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }
}

/// Daily operating cost of a route with one-way service time `t_route` hours.
pub fn service_cost(t_route: f64, cost: &CostParams) -> f64 {
    cost.service_span / cost.headway
        * (2.0 * t_route * cost.crew_wage
            + 2.0 * t_route * cost.speed * (cost.maintenance_cost + cost.fuel_cost))
}

/// Service time of a route of `km` length with `stops` stops in total.
pub fn service_time(km: f64, stops: usize, cost: &CostParams) -> f64 {
    km / cost.speed + DWELL_HOURS * stops.saturating_sub(2) as f64
}

/// Optional closed interval per criterion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CriterionRanges([Option<(f64, f64)>; 5]);

impl CriterionRanges {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, c: Criterion, lo: f64, hi: f64) -> Result<Self, CriteriaError> {
        self.set(c, lo, hi)?;
        Ok(self)
    }

    pub fn set(&mut self, c: Criterion, lo: f64, hi: f64) -> Result<(), CriteriaError> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(CriteriaError::Range(format!("{c}: lower bound {lo} exceeds upper bound {hi}")));
        }
        self.0[c.index()] = Some((lo, hi));
        Ok(())
    }

    pub fn get(&self, c: Criterion) -> Option<(f64, f64)> {
        self.0[c.index()]
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    pub fn contains(&self, v: &CriterionVector) -> bool {
        Criterion::ALL.into_iter().all(|c| match self.get(c) {
            Some((lo, hi)) => {
                let x = v.get(c);
                x >= lo - tolerance(lo) && x <= hi + tolerance(hi)
            }
            None => true,
        })
    }

    /// Whether every range intersects the corresponding `[min, max]` bound.
    pub fn overlaps(&self, b: &CriterionBounds) -> bool {
        Criterion::ALL.into_iter().all(|c| match self.get(c) {
            Some((lo, hi)) => {
                let (min, max) = b.get(c);
                min <= hi + tolerance(hi) && max >= lo - tolerance(lo)
            }
            None => true,
        })
    }

    /// Parses `name=lo..hi` terms separated by commas.
    pub fn parse(spec: &str) -> Result<Self, CriteriaError> {
        let mut ranges = Self::new();
        for term in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (name, interval) = term
                .split_once('=')
                .ok_or_else(|| CriteriaError::Range(format!("expected name=lo..hi, got `{term}`")))?;
            let (lo, hi) = interval
                .split_once("..")
                .ok_or_else(|| CriteriaError::Range(format!("expected lo..hi, got `{interval}`")))?;
            let num = |s: &str| -> Result<f64, CriteriaError> {
                let s = s.trim();
                if s.is_empty() {
                    return Ok(f64::NAN);
                }
                s.parse()
                    .map_err(|_| CriteriaError::Range(format!("bad number `{s}` in `{term}`")))
            };
            let (lo, hi) = (num(lo)?, num(hi)?);
            let lo = if lo.is_nan() { f64::NEG_INFINITY } else { lo };
            let hi = if hi.is_nan() { f64::INFINITY } else { hi };
            ranges.set(name.trim().parse()?, lo, hi)?;
        }
        Ok(ranges)
    }
}

fn tolerance(x: f64) -> f64 {
    if x.is_finite() {
        1e-9 * x.abs().max(1.0)
    } else {
        0.0
    }
}

impl Serialize for CriterionRanges {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, [f64; 2]> = Criterion::ALL
            .into_iter()
            .filter_map(|c| self.get(c).map(|(lo, hi)| (c.name(), [lo, hi])))
            .collect();
        map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CriterionRanges {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map: BTreeMap<String, [Option<f64>; 2]> = BTreeMap::deserialize(d)?;
        let mut ranges = Self::new();
        for (name, [lo, hi]) in map {
            let c: Criterion = name.parse().map_err(serde::de::Error::custom)?;
            ranges
                .set(c, lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
                .map_err(serde::de::Error::custom)?;
        }
        Ok(ranges)
    }
}

/// Per-criterion `(min, max)` over a set of routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionBounds {
    pub min: CriterionVector,
    pub max: CriterionVector,
}

impl CriterionBounds {
    pub fn get(&self, c: Criterion) -> (f64, f64) {
        (self.min.get(c), self.max.get(c))
    }

    pub fn contains(&self, v: &CriterionVector) -> bool {
        Criterion::ALL.into_iter().all(|c| {
            let (lo, hi) = self.get(c);
            let x = v.get(c);
            x >= lo - tolerance(lo) && x <= hi + tolerance(hi)
        })
    }

    fn unbounded() -> Self {
        Self {
            min: CriterionVector::from_array([f64::NEG_INFINITY; 5]),
            max: CriterionVector::from_array([f64::INFINITY; 5]),
        }
    }
}

/// Suffix tables over a pair weight matrix `w` (row-major, topological indices):
/// `A(p, q) = Σ_{v ≥ q} w(p, v)` and `B(q) = Σ_{q < u < v} w(u, v)`.
#[derive(Debug, Clone)]
pub struct PairTables {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Tables over the transit/road distance ratios.
pub type DirectnessTables = PairTables;

impl PairTables {
    pub fn new(w: &[f64], n: usize) -> Self {
        assert_eq!(w.len(), n * n);
        let mut a = vec![0.0; n * n];
        for p in 0..n {
            let mut acc = 0.0;
            for q in (0..n).rev() {
                acc += w[p * n + q];
                a[p * n + q] = acc;
            }
        }
        let mut b = vec![0.0; n];
        for q in (0..n.saturating_sub(1)).rev() {
            let next = q + 1;
            b[q] = b[next] + if next + 1 < n { a[next * n + next + 1] } else { 0.0 };
        }
        Self { n, a, b }
    }

    pub fn a(&self, p: usize, q: usize) -> f64 {
        self.a[p * self.n + q]
    }

    pub fn b(&self, q: usize) -> f64 {
        self.b[q]
    }
}

/// Tables for a graph's directness ratios `δ_uv / D_uv`.
pub fn precompute_directness_tables(graph: &StationGraph) -> DirectnessTables {
    PairTables::new(&ratio_matrix(graph), graph.len())
}

/// `δ_uv / D_uv` for `u` topologically before `v`; 0 for unreachable or degenerate pairs.
pub fn ratio_matrix(graph: &StationGraph) -> Vec<f64> {
    let n = graph.len();
    let mut w = vec![0.0; n * n];
    for u in 0..n {
        for v in u + 1..n {
            let (delta, d) = (graph.transit_distance(u, v), graph.road_distance(u, v));
            if delta.is_finite() && d > 0.0 {
                w[u * n + v] = delta / d;
            }
        }
    }
    w
}

/// Incrementally maintained summary of a route prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixStats {
    pub last: usize,
    pub stops: usize,
    pub km: f64,
    /// Sum of ratio weights over all pairs inside the prefix.
    pub ratio_pairs: f64,
    /// Sum of demand over all pairs inside the prefix.
    pub demand_pairs: f64,
}

#[derive(Debug, Clone)]
struct SuffixRange {
    min: Vec<f64>,
    max: Vec<f64>,
}

/// Criterion evaluator bound to one station graph, demand matrix and cost model.
#[derive(Debug, Clone)]
pub struct Evaluator {
    graph: Arc<StationGraph>,
    cost: CostParams,
    n: usize,
    ratio: Vec<f64>,
    demand: Vec<f64>,
    ratio_tables: PairTables,
    demand_tables: PairTables,
    /// Mean suffix length (km) and mean number of stops after each node, over all
    /// paths to the destination.
    mean_km: Vec<f64>,
    mean_after: Vec<f64>,
    construction: Vec<f64>,
    time: SuffixRange,
    after: SuffixRange,
    ratio_inner: SuffixRange,
    demand_inner: SuffixRange,
}

impl Evaluator {
    pub fn new(graph: Arc<StationGraph>, demand: &DemandMatrix, cost: CostParams) -> Result<Self, CriteriaError> {
        cost.validate()?;
        let n = graph.len();
        let ratio = ratio_matrix(&graph);
        let mut dem = vec![0.0; n * n];
        let space = graph.space();
        for (&(a, b), &count) in &demand.counts {
            let (Some(u), Some(v)) = (graph.node_of(a), graph.node_of(b)) else {
                continue;
            };
            if u < v && space.network_index(a).is_some() {
                dem[u * n + v] += count as f64;
            }
        }
        let ratio_tables = PairTables::new(&ratio, n);
        let demand_tables = PairTables::new(&dem, n);

        // Path-count weighted suffix means; the ratio n_y / n_x is taken in log space
        // so that very large path counts stay finite.
        let mut log_paths = vec![f64::NEG_INFINITY; n];
        let mut mean_km = vec![0.0; n];
        let mut mean_after = vec![0.0; n];
        let mut construction = vec![0.0; n];
        if n > 0 {
            log_paths[n - 1] = 0.0;
        }
        for x in (0..n.saturating_sub(1)).rev() {
            let succ = graph.successors(x);
            let top = succ.iter().map(|&y| log_paths[y]).fold(f64::NEG_INFINITY, f64::max);
            if top == f64::NEG_INFINITY {
                continue;
            }
            let total: f64 = succ.iter().map(|&y| (log_paths[y] - top).exp()).sum();
            log_paths[x] = top + total.ln();
            let (mut km, mut after, mut c) = (0.0, 0.0, 0.0);
            for &y in succ {
                let share = (log_paths[y] - log_paths[x]).exp();
                km += share * (graph.road_distance(x, y) + mean_km[y]);
                after += share * (1.0 + mean_after[y]);
                c += share * (construction[y] + cost.per_stop_cost);
            }
            mean_km[x] = km;
            mean_after[x] = after;
            construction[x] = c;
        }

        let tau = |u: usize, v: usize| graph.road_distance(u, v) / cost.speed + DWELL_HOURS;
        let time = suffix_range(&graph, |_, u, v| tau(u, v));
        let after = suffix_range(&graph, |_, _, _| 1.0);
        let ratio_inner = inner_pair_range(&graph, &ratio);
        let demand_inner = inner_pair_range(&graph, &dem);

        Ok(Self {
            graph,
            cost,
            n,
            ratio,
            demand: dem,
            ratio_tables,
            demand_tables,
            mean_km,
            mean_after,
            construction,
            time,
            after,
            ratio_inner,
            demand_inner,
        })
    }

    pub fn graph(&self) -> &Arc<StationGraph> {
        &self.graph
    }

    pub fn cost(&self) -> &CostParams {
        &self.cost
    }

    pub fn directness_tables(&self) -> &DirectnessTables {
        &self.ratio_tables
    }

    pub fn ratio(&self, u: usize, v: usize) -> f64 {
        self.ratio[u * self.n + v]
    }

    pub fn demand(&self, u: usize, v: usize) -> f64 {
        self.demand[u * self.n + v]
    }

    /// Exact criteria of a complete origin→destination route.
    pub fn evaluate_route(&self, route: &[usize]) -> Result<CriterionVector, CriteriaError> {
        if !self.graph.is_route(route) {
            return Err(CriteriaError::NotAPath(
                route
                    .iter()
                    .map(|&u| self.graph.stop_id(u).to_string())
                    .collect::<Vec<_>>()
                    .join(" -> "),
            ));
        }
        let km: f64 = route.windows(2).map(|w| self.graph.road_distance(w[0], w[1])).sum();
        let (mut flow, mut directness) = (0.0, 0.0);
        for (i, &u) in route.iter().enumerate() {
            for &v in &route[i + 1..] {
                flow += self.demand(u, v);
                directness += self.ratio(u, v);
            }
        }
        let time = service_time(km, route.len(), &self.cost);
        Ok(CriterionVector {
            service_time: time,
            passenger_flow: flow,
            directness,
            construction_cost: route.len() as f64 * self.cost.per_stop_cost,
            service_cost: service_cost(time, &self.cost),
        })
    }

    /// Evaluates a route given as stop ids.
    pub fn evaluate_stop_ids(&self, stops: &[String]) -> Result<(Vec<usize>, CriterionVector), CriteriaError> {
        let route = stops
            .iter()
            .map(|id| {
                self.graph
                    .node_by_id(id)
                    .ok_or_else(|| CriteriaError::NotAPath(format!("stop `{id}` is not in the station graph")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let v = self.evaluate_route(&route)?;
        Ok((route, v))
    }

    pub fn root_stats(&self) -> PrefixStats {
        PrefixStats {
            last: self.graph.origin(),
            stops: 1,
            km: 0.0,
            ratio_pairs: 0.0,
            demand_pairs: 0.0,
        }
    }

    /// Stats of `prefix + next`, where `stats` describes `prefix`.
    pub fn extend(&self, prefix: &[usize], stats: &PrefixStats, next: usize) -> PrefixStats {
        let (mut r, mut d) = (stats.ratio_pairs, stats.demand_pairs);
        for &u in prefix {
            r += self.ratio(u, next);
            d += self.demand(u, next);
        }
        PrefixStats {
            last: next,
            stops: stats.stops + 1,
            km: stats.km + self.graph.road_distance(stats.last, next),
            ratio_pairs: r,
            demand_pairs: d,
        }
    }

    /// Stats of a whole prefix computed from scratch.
    pub fn prefix_stats(&self, prefix: &[usize]) -> PrefixStats {
        let mut stats = self.root_stats();
        for i in 1..prefix.len() {
            stats = self.extend(&prefix[..i], &stats, prefix[i]);
        }
        stats
    }

    fn subspace_pairs(&self, prefix: &[usize], tables: &PairTables, w: &[f64], all_pairs: f64) -> f64 {
        let last = *prefix.last().expect("non-empty prefix");
        let n_paths = self.graph.paths_to_dest(last);
        if n_paths == 0.0 {
            return 0.0;
        }
        let mut head = tables.b(last);
        let mut to_last = 0.0;
        for &u in prefix {
            head += tables.a(u, last);
            to_last += w[u * self.n + last];
        }
        head / n_paths + (all_pairs - to_last)
    }

    /// Directness estimate for all completions of `prefix`:
    /// `(Σ_{u∈R} A(u, r_k) + B(r_k)) / N(r_k, d)` plus the ratios of prefix pairs
    /// that do not end at `r_k`.
    pub fn subspace_directness(&self, prefix: &[usize]) -> f64 {
        let stats = self.prefix_stats(prefix);
        self.subspace_pairs(prefix, &self.ratio_tables, &self.ratio, stats.ratio_pairs)
    }

    /// Mean construction cost over the completions of `prefix`.
    pub fn subspace_construction_cost(&self, prefix: &[usize]) -> f64 {
        let last = *prefix.last().expect("non-empty prefix");
        prefix.len() as f64 * self.cost.per_stop_cost + self.construction[last]
    }

    /// Subspace estimates of every criterion; exact once the prefix is complete.
    pub fn estimate(&self, prefix: &[usize], stats: &PrefixStats) -> CriterionVector {
        let last = stats.last;
        let km = stats.km + self.mean_km[last];
        let time = km / self.cost.speed
            + DWELL_HOURS * (stats.stops as f64 + self.mean_after[last] - 2.0).max(0.0);
        CriterionVector {
            service_time: time,
            passenger_flow: self.subspace_pairs(prefix, &self.demand_tables, &self.demand, stats.demand_pairs),
            directness: self.subspace_pairs(prefix, &self.ratio_tables, &self.ratio, stats.ratio_pairs),
            construction_cost: stats.stops as f64 * self.cost.per_stop_cost + self.construction[last],
            service_cost: service_cost(time, &self.cost),
        }
    }

    /// Bounds for the additive criteria only (service time, construction and service
    /// cost); the pairwise criteria are left unbounded. O(1).
    pub fn additive_bounds(&self, stats: &PrefixStats) -> CriterionBounds {
        let mut b = CriterionBounds::unbounded();
        let last = stats.last;
        let base = stats.km / self.cost.speed + DWELL_HOURS * (stats.stops as f64 - 2.0);
        let (tmin, tmax) = (base + self.time.min[last], base + self.time.max[last]);
        b.min.service_time = tmin;
        b.max.service_time = tmax;
        b.min.service_cost = service_cost(tmin, &self.cost);
        b.max.service_cost = service_cost(tmax, &self.cost);
        let cs = self.cost.per_stop_cost;
        b.min.construction_cost = (stats.stops as f64 + self.after.min[last]) * cs;
        b.max.construction_cost = (stats.stops as f64 + self.after.max[last]) * cs;
        b
    }

    /// Sound bounds on every criterion over all completions of `prefix`, whose stats
    /// are `stats`. Costs O(|prefix|·V + E).
    pub fn bounds(&self, prefix: &[usize], stats: &PrefixStats) -> CriterionBounds {
        let mut b = self.additive_bounds(stats);
        let (lo, hi) = self.pair_bounds(prefix, stats.ratio_pairs, &self.ratio, &self.ratio_inner);
        b.min.directness = lo;
        b.max.directness = hi;
        let (lo, hi) = self.pair_bounds(prefix, stats.demand_pairs, &self.demand, &self.demand_inner);
        b.min.passenger_flow = lo;
        b.max.passenger_flow = hi;
        b
    }

    /// Bounds for the subspace of `prefix + station`.
    pub fn criterion_bounds(&self, prefix: &[usize], station: usize) -> CriterionBounds {
        let stats = self.extend(prefix, &self.prefix_stats(prefix), station);
        let mut extended = prefix.to_vec();
        extended.push(station);
        self.bounds(&extended, &stats)
    }

    /// A completed route's pairwise sum is `pairs(R) + Σ_{v∈Q} W(v) + I(Q)` where `Q`
    /// are the stops after the prefix, `W(v) = Σ_{u∈R} w(u, v)` and `I(Q)` the sum over
    /// pairs inside `Q`. The cross term is bounded by a min/max path DP over `W`, the
    /// inner term by the precomputed per-node range.
    fn pair_bounds(&self, prefix: &[usize], pairs: f64, w: &[f64], inner: &SuffixRange) -> (f64, f64) {
        let n = self.n;
        let last = *prefix.last().expect("non-empty prefix");
        let dest = self.graph.destination();
        if last == dest {
            return (pairs, pairs);
        }
        let mut cross = vec![0.0; n];
        for &u in prefix {
            let row = &w[u * n..(u + 1) * n];
            for v in last + 1..n {
                cross[v] += row[v];
            }
        }
        let mut gmin = vec![f64::INFINITY; n];
        let mut gmax = vec![f64::NEG_INFINITY; n];
        gmin[dest] = 0.0;
        gmax[dest] = 0.0;
        for x in (last..dest).rev() {
            for &y in self.graph.successors(x) {
                if gmin[y].is_finite() {
                    gmin[x] = gmin[x].min(cross[y] + gmin[y]);
                    gmax[x] = gmax[x].max(cross[y] + gmax[y]);
                }
            }
        }
        (
            pairs + gmin[last] + inner.min[last],
            pairs + gmax[last] + inner.max[last],
        )
    }
}

/// Min/max over paths `x → d` of the sum of `weight(x_i, x_{i+1})` along the path.
fn suffix_range(graph: &StationGraph, weight: impl Fn(usize, usize, usize) -> f64) -> SuffixRange {
    let n = graph.len();
    let mut min = vec![f64::INFINITY; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    if n == 0 {
        return SuffixRange { min, max };
    }
    min[n - 1] = 0.0;
    max[n - 1] = 0.0;
    for x in (0..n - 1).rev() {
        for &y in graph.successors(x) {
            let w = weight(x, x, y);
            min[x] = min[x].min(w + min[y]);
            max[x] = max[x].max(w + max[y]);
        }
    }
    SuffixRange { min, max }
}

/// For every node `x`, bounds on the pair sum over the stops strictly after `x` on
/// any path to the destination. With `Q(x) = {y} ∪ Q(y)` for the next stop `y`, the
/// sum splits into `Σ_{v∈Q(y)} w(y, v)` (bounded by a path DP over row `y`) and the
/// inner sum of `Q(y)`.
fn inner_pair_range(graph: &StationGraph, w: &[f64]) -> SuffixRange {
    let n = graph.len();
    let mut row_min = vec![0.0; n];
    let mut row_max = vec![0.0; n];
    let mut gmin = vec![0.0; n];
    let mut gmax = vec![0.0; n];
    if n == 0 {
        return SuffixRange { min: vec![], max: vec![] };
    }
    for y in 0..n {
        let row = &w[y * n..(y + 1) * n];
        gmin[n - 1] = 0.0;
        gmax[n - 1] = 0.0;
        for x in (y..n - 1).rev() {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &z in graph.successors(x) {
                lo = lo.min(row[z] + gmin[z]);
                hi = hi.max(row[z] + gmax[z]);
            }
            gmin[x] = lo;
            gmax[x] = hi;
        }
        row_min[y] = gmin[y];
        row_max[y] = gmax[y];
    }
    let mut min = vec![f64::INFINITY; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    min[n - 1] = 0.0;
    max[n - 1] = 0.0;
    for x in (0..n - 1).rev() {
        for &y in graph.successors(x) {
            min[x] = min[x].min(row_min[y] + min[y]);
            max[x] = max[x].max(row_max[y] + max[y]);
        }
    }
    SuffixRange { min, max }
}
