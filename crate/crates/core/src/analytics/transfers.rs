use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::geo::haversine_km;
use crate::network::{BusNetwork, TransferParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferLink {
    pub card_id: String,
    /// Trip indices into the network's trip list.
    pub from_trip: usize,
    pub to_trip: usize,
    pub from_route: String,
    pub from_stop: String,
    pub tap_off: DateTime<Utc>,
    pub to_route: String,
    pub to_stop: String,
    pub tap_on: DateTime<Utc>,
    pub walk_m: f64,
    pub wait_min: f64,
}

/// Links consecutive trips of a card on different routes whose alighting and next
/// boarding are within the walk and wait limits. Each trip has at most one incoming
/// and one outgoing link because only consecutive pairs are considered.
pub fn detect_transfers(network: &BusNetwork, params: &TransferParams) -> Vec<TransferLink> {
    let trips = network.trips();
    let mut by_card: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, t) in trips.iter().enumerate() {
        by_card.entry(t.card_id.as_str()).or_default().push(i);
    }
    let mut cards: Vec<(&str, Vec<usize>)> = by_card.into_iter().collect();
    cards.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let mut out = Vec::new();
    for (card, mut list) in cards {
        list.sort_by_key(|&i| (trips[i].tap_on, i));
        for pair in list.windows(2) {
            let (a, b) = (&trips[pair[0]], &trips[pair[1]]);
            if a.route == b.route {
                continue;
            }
            let wait = b.tap_on - a.tap_off;
            if wait < chrono::Duration::zero() || wait > params.max_wait() {
                continue;
            }
            let (x, y) = (network.alight_stop(a), network.board_stop(b));
            let walk_m = haversine_km(network.stop(x).position(), network.stop(y).position()) * 1000.0;
            if walk_m > params.max_walk_m {
                continue;
            }
            out.push(TransferLink {
                card_id: card.to_string(),
                from_trip: pair[0],
                to_trip: pair[1],
                from_route: network.route(a.route).route_id.clone(),
                from_stop: network.stop(x).stop_id.clone(),
                tap_off: a.tap_off,
                to_route: network.route(b.route).route_id.clone(),
                to_stop: network.stop(y).stop_id.clone(),
                tap_on: b.tap_on,
                walk_m,
                wait_min: wait.num_milliseconds() as f64 / 60_000.0,
            });
        }
    }
    out
}

/// Transfers between one route and all others at one of its stops.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferSummary {
    pub route_id: String,
    pub stop_id: String,
    /// Routes passengers arrived from before boarding this route here.
    pub incoming: BTreeMap<String, u64>,
    /// Routes passengers continued on after alighting from this route here.
    pub outgoing: BTreeMap<String, u64>,
    pub total_incoming: u64,
    pub total_outgoing: u64,
}

pub fn transfer_summary(links: &[TransferLink], route_id: &str, stop_id: &str) -> TransferSummary {
    let mut s = TransferSummary {
        route_id: route_id.to_string(),
        stop_id: stop_id.to_string(),
        ..TransferSummary::default()
    };
    for l in links {
        if l.to_route == route_id && l.to_stop == stop_id {
            *s.incoming.entry(l.from_route.clone()).or_default() += 1;
            s.total_incoming += 1;
        }
        if l.from_route == route_id && l.from_stop == stop_id {
            *s.outgoing.entry(l.to_route.clone()).or_default() += 1;
            s.total_outgoing += 1;
        }
    }
    s
}
