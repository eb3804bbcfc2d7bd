use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{route_metrics, AnalyticsError, RouteMetrics};
use crate::criteria::{CostParams, Criterion, CriterionVector};
use crate::network::{BusNetwork, TimeWindow};

pub const RANK_HEADER: [&str; 7] = [
    "route_id",
    "service_time",
    "passenger_flow",
    "directness",
    "construction_cost",
    "service_cost",
    "score",
];

/// Quantities a route filter may constrain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteMetric {
    RouteLength,
    StopCount,
    AverageLoad,
    Criterion(Criterion),
}

impl RouteMetric {
    pub fn value(&self, m: &RouteMetrics) -> f64 {
        match self {
            Self::RouteLength => m.route_length_km,
            Self::StopCount => m.stop_count as f64,
            Self::AverageLoad => m.average_load,
            Self::Criterion(c) => m.criteria.get(*c),
        }
    }
}

impl FromStr for RouteMetric {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "route_length" | "length" => Self::RouteLength,
            "stop_count" | "stops" => Self::StopCount,
            "average_load" | "load" => Self::AverageLoad,
            "flow" => Self::Criterion(Criterion::PassengerFlow),
            other => Self::Criterion(
                other
                    .parse()
                    .map_err(|_| AnalyticsError::Params(format!("unknown route metric `{other}`")))?,
            ),
        })
    }
}

impl fmt::Display for RouteMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RouteLength => f.write_str("route_length"),
            Self::StopCount => f.write_str("stop_count"),
            Self::AverageLoad => f.write_str("average_load"),
            Self::Criterion(c) => write!(f, "{c}"),
        }
    }
}

/// Conjunction of closed intervals on route metrics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankFilters(pub Vec<(RouteMetric, f64, f64)>);

impl RankFilters {
    /// Parses `metric>=x`, `metric<=x` or `metric=lo..hi` items separated by commas;
    /// either end of a range may be omitted.
    pub fn parse(s: &str) -> Result<Self, AnalyticsError> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let bad = || AnalyticsError::Params(format!("malformed filter `{item}`"));
            let num = |x: &str| -> Result<f64, AnalyticsError> {
                let v: f64 = x.trim().parse().map_err(|_| bad())?;
                if v.is_nan() {
                    return Err(bad());
                }
                Ok(v)
            };
            let (metric, lo, hi) = if let Some((m, v)) = item.split_once(">=") {
                (m, num(v)?, f64::INFINITY)
            } else if let Some((m, v)) = item.split_once("<=") {
                (m, f64::NEG_INFINITY, num(v)?)
            } else if let Some((m, v)) = item.split_once('=') {
                let (a, b) = v.split_once("..").ok_or_else(bad)?;
                let lo = if a.trim().is_empty() { f64::NEG_INFINITY } else { num(a)? };
                let hi = if b.trim().is_empty() { f64::INFINITY } else { num(b)? };
                (m, lo, hi)
            } else {
                return Err(bad());
            };
            if lo > hi {
                return Err(AnalyticsError::Params(format!("empty filter range in `{item}`")));
            }
            out.push((metric.parse()?, lo, hi));
        }
        Ok(Self(out))
    }

    pub fn accepts(&self, m: &RouteMetrics) -> bool {
        self.0.iter().all(|(metric, lo, hi)| {
            let v = metric.value(m);
            v >= *lo && v <= *hi
        })
    }
}

/// Non-negative weight per criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankWeights(pub CriterionVector);

impl Default for RankWeights {
    fn default() -> Self {
        Self(CriterionVector::from_array([1.0; 5]))
    }
}

impl RankWeights {
    pub fn new(weights: [f64; 5]) -> Result<Self, AnalyticsError> {
        let w = Self(CriterionVector::from_array(weights));
        w.validate()?;
        Ok(w)
    }

    /// Parses `criterion=weight` items; unnamed criteria get weight 0.
    pub fn parse(s: &str) -> Result<Self, AnalyticsError> {
        let mut w = [0.0; 5];
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (name, v) = item
                .split_once('=')
                .ok_or_else(|| AnalyticsError::Params(format!("malformed weight `{item}`")))?;
            let c: Criterion = if name.trim() == "flow" {
                Criterion::PassengerFlow
            } else {
                name.trim()
                    .parse()
                    .map_err(|_| AnalyticsError::Params(format!("unknown criterion `{}`", name.trim())))?
            };
            w[c.index()] = v
                .trim()
                .parse()
                .map_err(|_| AnalyticsError::Params(format!("malformed weight `{item}`")))?;
        }
        Self::new(w)
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let w = self.0.to_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(AnalyticsError::Params("weights must be finite and non-negative".into()));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(AnalyticsError::Params("at least one weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRoute {
    pub rank: usize,
    pub route_id: String,
    pub criteria: CriterionVector,
    pub score: f64,
}

/// Ranks existing routes: criteria are min-max normalised over the routes passing
/// the filters, flipped so that 1 is best, and combined with the weights.
pub fn rank_routes(
    network: &BusNetwork,
    weights: &RankWeights,
    filters: &RankFilters,
    window: &TimeWindow,
    cost: &CostParams,
) -> Result<Vec<RankedRoute>, AnalyticsError> {
    rank_metrics(&route_metrics(network, window, cost), weights, filters)
}

pub fn rank_metrics(
    metrics: &[RouteMetrics],
    weights: &RankWeights,
    filters: &RankFilters,
) -> Result<Vec<RankedRoute>, AnalyticsError> {
    weights.validate()?;
    let kept: Vec<&RouteMetrics> = metrics.iter().filter(|m| filters.accepts(m)).collect();
    let mut lo = [f64::INFINITY; 5];
    let mut hi = [f64::NEG_INFINITY; 5];
    for m in &kept {
        for (i, v) in m.criteria.to_array().into_iter().enumerate() {
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    let w = weights.0.to_array();
    let mut ranked: Vec<RankedRoute> = kept
        .iter()
        .map(|m| {
            let score = Criterion::ALL
                .iter()
                .map(|c| {
                    let i = c.index();
                    let span = hi[i] - lo[i];
                    let norm = if span > 0.0 { (m.criteria.get(*c) - lo[i]) / span } else { 0.0 };
                    w[i] * if c.maximize() { norm } else { 1.0 - norm }
                })
                .sum();
            RankedRoute {
                rank: 0,
                route_id: m.route_id.clone(),
                criteria: m.criteria,
                score,
            }
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.route_id.cmp(&b.route_id)));
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ranked)
}

pub fn write_rank_csv<W: Write>(ranked: &[RankedRoute], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RANK_HEADER)?;
    for r in ranked {
        let mut row = vec![r.route_id.clone()];
        row.extend(r.criteria.to_array().iter().map(|v| v.to_string()));
        row.push(r.score.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
