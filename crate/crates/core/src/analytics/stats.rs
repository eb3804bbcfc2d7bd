use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{route_metrics, ZonePartition};
use crate::criteria::CostParams;
use crate::geo::{bearing_deg, bearing_sector};
use crate::network::{BusNetwork, TimeWindow};

pub const BEARING_SECTORS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneStats {
    pub zone_id: String,
    pub route_count: usize,
    pub route_length_avg: f64,
    pub stop_count_avg: f64,
    pub passenger_volume: u64,
    pub average_load: f64,
    pub directness_avg: f64,
    pub service_cost_avg: f64,
    /// Trips boarding in the zone and alighting elsewhere, by compass sector (0 = north,
    /// clockwise) of the alighting stop seen from the zone centroid.
    pub outflow_by_bearing: [u64; BEARING_SECTORS],
    /// Trips alighting in the zone that boarded elsewhere, by sector of the boarding stop.
    pub inflow_by_bearing: [u64; BEARING_SECTORS],
}

/// Per-zone statistics keyed by zone id. Averages run over the routes serving at
/// least one stop of the zone; volumes and flows count in-window trips.
pub fn zone_statistics(
    partition: &ZonePartition,
    network: &BusNetwork,
    window: &TimeWindow,
    cost: &CostParams,
) -> BTreeMap<String, ZoneStats> {
    let metrics = route_metrics(network, window, cost);
    let mut out: Vec<ZoneStats> = partition
        .zones
        .iter()
        .map(|z| ZoneStats {
            zone_id: z.zone_id.clone(),
            route_count: 0,
            route_length_avg: 0.0,
            stop_count_avg: 0.0,
            passenger_volume: 0,
            average_load: 0.0,
            directness_avg: 0.0,
            service_cost_avg: 0.0,
            outflow_by_bearing: [0; BEARING_SECTORS],
            inflow_by_bearing: [0; BEARING_SECTORS],
        })
        .collect();
    for (r, m) in metrics.iter().enumerate() {
        let mut zones: Vec<usize> = network.route(r).stops.iter().map(|&s| partition.zone_of[s]).collect();
        zones.sort_unstable();
        zones.dedup();
        for z in zones {
            let s = &mut out[z];
            s.route_count += 1;
            s.route_length_avg += m.route_length_km;
            s.stop_count_avg += m.stop_count as f64;
            s.average_load += m.average_load;
            s.directness_avg += m.criteria.directness;
            s.service_cost_avg += m.criteria.service_cost;
        }
    }
    for s in &mut out {
        if s.route_count > 0 {
            let n = s.route_count as f64;
            s.route_length_avg /= n;
            s.stop_count_avg /= n;
            s.average_load /= n;
            s.directness_avg /= n;
            s.service_cost_avg /= n;
        }
    }
    for t in network.trips() {
        if !window.contains(t.tap_on) {
            continue;
        }
        let (from, to) = (network.board_stop(t), network.alight_stop(t));
        let (zf, zt) = (partition.zone_of[from], partition.zone_of[to]);
        out[zf].passenger_volume += 1;
        if zf != zt {
            let c = partition.zones[zf].centroid;
            out[zf].outflow_by_bearing[bearing_sector(bearing_deg(c, network.stop(to).position()), BEARING_SECTORS)] += 1;
            let c = partition.zones[zt].centroid;
            out[zt].inflow_by_bearing[bearing_sector(bearing_deg(c, network.stop(from).position()), BEARING_SECTORS)] += 1;
        }
    }
    out.into_iter().map(|s| (s.zone_id.clone(), s)).collect()
}
