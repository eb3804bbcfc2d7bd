//! Network, route and stop level analytics: transportation zones, zone statistics,
//! route ranking, passenger flow matrices and transfer detection.

mod flow;
mod rank;
mod stats;
mod transfers;
pub mod voronoi;
mod zones;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{self, CostParams, CriterionVector};
use crate::network::{BusNetwork, NetworkError, RouteIdx, TimeWindow};

pub use flow::{flow_matrix, flow_matrix_with_links, FlowCell, FlowMatrix, StopFlow, TimeBin, TransferBadge};
pub use rank::{rank_metrics, rank_routes, write_rank_csv, RankFilters, RankWeights, RankedRoute, RouteMetric, RANK_HEADER};
pub use stats::{zone_statistics, ZoneStats, BEARING_SECTORS};
pub use transfers::{detect_transfers, transfer_summary, TransferLink, TransferSummary};
pub use zones::{compute_zones, GeoPolygon, Zone, ZonePartition};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("invalid parameter: {0}")]
    Params(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl AnalyticsError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Params(_) => "invalid_parameter",
            Self::Network(e) => e.code(),
        }
    }
}

/// Observed performance of an existing route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteMetrics {
    pub route_id: String,
    pub route_length_km: f64,
    pub stop_count: usize,
    /// In-window boardings on the route.
    pub trips: u64,
    pub average_load: f64,
    pub criteria: CriterionVector,
}

/// Along-route over shortest-road distance summed over ordered stop pairs.
pub fn route_directness(network: &BusNetwork, route: RouteIdx) -> f64 {
    let stops = &network.route(route).stops;
    let mut cum = vec![0.0; stops.len()];
    for i in 1..stops.len() {
        cum[i] = cum[i - 1] + network.road_distance(stops[i - 1], stops[i]);
    }
    let mut total = 0.0;
    for i in 0..stops.len() {
        for j in i + 1..stops.len() {
            let d = network.road_distance(stops[i], stops[j]);
            if d > 0.0 {
                total += (cum[j] - cum[i]) / d;
            }
        }
    }
    total
}

/// Metrics of every route, in route order.
pub fn route_metrics(network: &BusNetwork, window: &TimeWindow, cost: &CostParams) -> Vec<RouteMetrics> {
    let n = network.routes().len();
    let mut trips = vec![0u64; n];
    let mut passenger_km = vec![0.0; n];
    for t in network.trips() {
        if window.contains(t.tap_on) {
            trips[t.route] += 1;
            passenger_km[t.route] += network.route_distance(t.route, t.board_pos, t.alight_pos);
        }
    }
    let days = window.days();
    (0..n)
        .map(|r| {
            let route = network.route(r);
            let km = network.route_length(r);
            let time = criteria::service_time(km, route.stops.len(), cost);
            RouteMetrics {
                route_id: route.route_id.clone(),
                route_length_km: km,
                stop_count: route.stops.len(),
                trips: trips[r],
                average_load: if km > 0.0 && days > 0.0 { passenger_km[r] / (km * days) } else { 0.0 },
                criteria: CriterionVector {
                    service_time: time,
                    passenger_flow: trips[r] as f64,
                    directness: route_directness(network, r),
                    construction_cost: route.stops.len() as f64 * cost.per_stop_cost,
                    service_cost: criteria::service_cost(time, cost),
                },
            }
        })
        .collect()
}
