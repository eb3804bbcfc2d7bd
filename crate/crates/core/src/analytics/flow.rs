use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

use super::transfers::{detect_transfers, TransferLink};
use super::AnalyticsError;
use crate::network::{BusNetwork, TimeWindow, TransferParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeBin {
    Hourly,
    Weekday,
}

impl TimeBin {
    pub fn bins(self) -> usize {
        match self {
            Self::Hourly => 24,
            Self::Weekday => 7,
        }
    }

    /// Hour of day, or weekday with Monday = 0, in UTC.
    pub fn bin(self, t: DateTime<Utc>) -> usize {
        match self {
            Self::Hourly => t.hour() as usize,
            Self::Weekday => t.weekday().num_days_from_monday() as usize,
        }
    }
}

impl FromStr for TimeBin {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hourly" | "hour" => Ok(Self::Hourly),
            "weekday" | "day" => Ok(Self::Weekday),
            other => Err(AnalyticsError::Params(format!("unknown time bin `{other}`"))),
        }
    }
}

impl fmt::Display for TimeBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hourly => "hourly",
            Self::Weekday => "weekday",
        })
    }
}

/// Passengers boarding at route position `from` and alighting at `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowCell {
    pub from: usize,
    pub to: usize,
    pub count: u64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopFlow {
    pub stop_id: String,
    pub boardings: u64,
    pub alightings: u64,
    pub check_in: Vec<u64>,
    pub check_out: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferBadge {
    pub position: usize,
    pub stop_id: String,
    pub in_routes: BTreeMap<String, u64>,
    pub out_routes: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMatrix {
    pub route_id: String,
    pub stops: Vec<String>,
    pub threshold: f64,
    pub bin: TimeBin,
    /// Non-empty cells in row-major order.
    pub cells: Vec<FlowCell>,
    /// Per route position.
    pub stop_flows: Vec<StopFlow>,
    pub total_trips: u64,
    /// Positions with at least one transfer.
    pub transfers: Vec<TransferBadge>,
}

impl FlowMatrix {
    pub fn count(&self, from: usize, to: usize) -> u64 {
        self.cells
            .binary_search_by(|c| (c.from, c.to).cmp(&(from, to)))
            .map_or(0, |i| self.cells[i].count)
    }
}

pub fn flow_matrix(
    network: &BusNetwork,
    route_id: &str,
    window: &TimeWindow,
    threshold: f64,
    bin: TimeBin,
    transfer: &TransferParams,
) -> Result<FlowMatrix, AnalyticsError> {
    let links = detect_transfers(network, transfer);
    flow_matrix_with_links(network, route_id, window, threshold, bin, &links)
}

/// Like [`flow_matrix`] with transfers already detected.
pub fn flow_matrix_with_links(
    network: &BusNetwork,
    route_id: &str,
    window: &TimeWindow,
    threshold: f64,
    bin: TimeBin,
    links: &[TransferLink],
) -> Result<FlowMatrix, AnalyticsError> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(AnalyticsError::Params(format!("intensity threshold must be positive, got {threshold}")));
    }
    let r = network.require_route(route_id)?;
    let route = network.route(r);
    let n = route.stops.len();
    let stop_ids: Vec<String> = route.stops.iter().map(|&s| network.stop(s).stop_id.clone()).collect();
    let mut stop_flows: Vec<StopFlow> = stop_ids
        .iter()
        .map(|id| StopFlow {
            stop_id: id.clone(),
            boardings: 0,
            alightings: 0,
            check_in: vec![0; bin.bins()],
            check_out: vec![0; bin.bins()],
        })
        .collect();
    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let trips = network.trips();
    let mut total = 0;
    for t in trips.iter().filter(|t| t.route == r && window.contains(t.tap_on)) {
        total += 1;
        *counts.entry((t.board_pos, t.alight_pos)).or_default() += 1;
        stop_flows[t.board_pos].boardings += 1;
        stop_flows[t.board_pos].check_in[bin.bin(t.tap_on)] += 1;
        stop_flows[t.alight_pos].alightings += 1;
        stop_flows[t.alight_pos].check_out[bin.bin(t.tap_off)] += 1;
    }
    let cells = counts
        .into_iter()
        .map(|((from, to), count)| FlowCell {
            from,
            to,
            count,
            intensity: (count as f64 / threshold).min(1.0),
        })
        .collect();

    let mut badges: Vec<TransferBadge> = (0..n)
        .map(|p| TransferBadge {
            position: p,
            stop_id: stop_ids[p].clone(),
            ..TransferBadge::default()
        })
        .collect();
    for l in links {
        let (a, b) = (&trips[l.from_trip], &trips[l.to_trip]);
        if b.route == r && window.contains(b.tap_on) {
            *badges[b.board_pos].in_routes.entry(l.from_route.clone()).or_default() += 1;
        }
        if a.route == r && window.contains(a.tap_on) {
            *badges[a.alight_pos].out_routes.entry(l.to_route.clone()).or_default() += 1;
        }
    }
    badges.retain(|b| !b.in_routes.is_empty() || !b.out_routes.is_empty());

    Ok(FlowMatrix {
        route_id: route_id.to_string(),
        stops: stop_ids,
        threshold,
        bin,
        cells,
        stop_flows,
        total_trips: total,
        transfers: badges,
    })
}
