//! Stops, routes and smart-card trips: ingestion, validation and tap-off inference.
//!
//! A [`BusNetwork`] is immutable once built. Rows that break referential integrity
//! are dropped and recorded in an [`IngestReport`] rather than failing the load,
//! because fare-card feeds are routinely noisy. Structural problems (a bad header,
//! an empty stop file) reject the whole dataset.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_km, LatLon};

/// Index of a stop inside a [`BusNetwork`].
pub type StopIdx = usize;
/// Index of a route inside a [`BusNetwork`].
pub type RouteIdx = usize;

/// Default multiplier applied to great-circle distance when no road distance is known.
pub const DEFAULT_DETOUR_FACTOR: f64 = 1.3;
/// Bus speed used for tap-off inference, km/h.
pub const INFERENCE_SPEED_KMH: f64 = 20.0;
/// Dwell time charged per intermediate stop during tap-off inference, minutes.
pub const INFERENCE_DWELL_MIN: f64 = 2.0;

const MAX_RECORDED_ISSUES: usize = 1000;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{file}: malformed header at line {line}: expected `{expected}`")]
    MalformedHeader {
        file: &'static str,
        line: u64,
        expected: &'static str,
    },
    #[error("stop file contains no valid stops")]
    EmptyStops,
    #[error("invalid trip: {0}")]
    InvalidTrip(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unknown stop `{0}`")]
    UnknownStop(String),
    #[error("unknown route `{0}`")]
    UnknownRoute(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl NetworkError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MalformedHeader { .. } => "malformed_header",
            Self::EmptyStops => "empty_stops",
            Self::InvalidTrip(_) => "invalid_trip",
            Self::Parameter(_) => "invalid_parameter",
            Self::UnknownStop(_) => "unknown_stop",
            Self::UnknownRoute(_) => "unknown_route",
            Self::Io { .. } => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub stop_id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

impl Stop {
    pub fn position(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusRoute {
    pub route_id: String,
    /// Stops in travel order.
    pub stops: Vec<StopIdx>,
}

/// One fare-card boarding. Positions index into the route's stop list so that
/// routes visiting a stop twice stay unambiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    pub card_id: String,
    pub tap_on: DateTime<Utc>,
    pub route: RouteIdx,
    pub board_pos: usize,
    pub alight_pos: usize,
    pub tap_off: DateTime<Utc>,
}

/// Parameters linking consecutive trips of one card.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferParams {
    pub max_walk_m: f64,
    pub max_wait_min: f64,
}

impl Default for TransferParams {
    fn default() -> Self {
        Self {
            max_walk_m: 500.0,
            max_wait_min: 30.0,
        }
    }
}

impl TransferParams {
    pub fn max_wait(&self) -> Duration {
        Duration::milliseconds((self.max_wait_min * 60_000.0).round() as i64)
    }
}

/// Road distance lookup: explicit pairs first, great-circle times a detour factor otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadDistances {
    pub detour_factor: f64,
    overrides: HashMap<(StopIdx, StopIdx), f64>,
}

impl Default for RoadDistances {
    fn default() -> Self {
        Self {
            detour_factor: DEFAULT_DETOUR_FACTOR,
            overrides: HashMap::new(),
        }
    }
}

impl RoadDistances {
    pub fn with_detour_factor(detour_factor: f64) -> Self {
        Self {
            detour_factor,
            overrides: HashMap::new(),
        }
    }

    pub fn set(&mut self, from: StopIdx, to: StopIdx, km: f64) {
        self.overrides.insert((from, to), km);
    }

    pub fn len(&self) -> usize {
        self.overrides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overrides.is_empty()
    }

    fn lookup(&self, a: StopIdx, b: StopIdx) -> Option<f64> {
        self.overrides
            .get(&(a, b))
            .or_else(|| self.overrides.get(&(b, a)))
            .copied()
    }
}

/// A half-open time interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self, NetworkError> {
        if start >= end {
            return Err(NetworkError::Parameter(format!(
                "time window must be non-empty: {start} .. {end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }

    pub fn days(&self) -> f64 {
        (self.end - self.start).num_milliseconds() as f64 / 86_400_000.0
    }
}

/// One dropped or rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIssue {
    pub file: String,
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub dropped_stops: usize,
    pub dropped_routes: usize,
    pub dropped_trips: usize,
    pub dropped_road_distances: usize,
    /// The first issues encountered, capped to keep reports bounded.
    pub issues: Vec<RowIssue>,
}

impl IngestReport {
    fn record(&mut self, file: &str, line: u64, reason: impl Into<String>) {
        if self.issues.len() < MAX_RECORDED_ISSUES {
            self.issues.push(RowIssue {
                file: file.to_string(),
                line,
                reason: reason.into(),
            });
        }
    }
}

#[derive(Debug, Clone)]
pub struct BusNetwork {
    stops: Vec<Stop>,
    routes: Vec<BusRoute>,
    trips: Vec<TripRecord>,
    road: RoadDistances,
    stop_lookup: HashMap<String, StopIdx>,
    route_lookup: HashMap<String, RouteIdx>,
    /// Trip indices per card, ordered by tap-on time.
    card_trips: HashMap<String, Vec<usize>>,
}

impl BusNetwork {
    /// Builds a network from already-validated parts. Tap-off times of the trips are
    /// re-inferred.
    pub fn from_parts(
        stops: Vec<Stop>,
        routes: Vec<BusRoute>,
        trips: Vec<TripRecord>,
        road: RoadDistances,
        transfer: &TransferParams,
    ) -> Result<Self, NetworkError> {
        let mut stop_lookup = HashMap::with_capacity(stops.len());
        for (i, s) in stops.iter().enumerate() {
            if !s.position().is_valid() {
                return Err(NetworkError::Parameter(format!(
                    "stop `{}` has invalid coordinates",
                    s.stop_id
                )));
            }
            if stop_lookup.insert(s.stop_id.clone(), i).is_some() {
                return Err(NetworkError::Parameter(format!(
                    "duplicate stop id `{}`",
                    s.stop_id
                )));
            }
        }
        let mut route_lookup = HashMap::with_capacity(routes.len());
        for (i, r) in routes.iter().enumerate() {
            if let Err(reason) = check_route_stops(&r.stops, stops.len()) {
                return Err(NetworkError::Parameter(format!(
                    "route `{}`: {reason}",
                    r.route_id
                )));
            }
            if route_lookup.insert(r.route_id.clone(), i).is_some() {
                return Err(NetworkError::Parameter(format!(
                    "duplicate route id `{}`",
                    r.route_id
                )));
            }
        }
        for t in &trips {
            let route = routes
                .get(t.route)
                .ok_or_else(|| NetworkError::UnknownRoute(t.route.to_string()))?;
            if t.board_pos >= t.alight_pos || t.alight_pos >= route.stops.len() {
                return Err(NetworkError::InvalidTrip(format!(
                    "card `{}`: alight position must follow boarding position",
                    t.card_id
                )));
            }
        }
        let mut network = Self {
            stops,
            routes,
            trips,
            road,
            stop_lookup,
            route_lookup,
            card_trips: HashMap::new(),
        };
        network.index_cards();
        network.infer_all_tap_offs(transfer)?;
        Ok(network)
    }

    pub fn stops(&self) -> &[Stop] {
        &self.stops
    }

    pub fn routes(&self) -> &[BusRoute] {
        &self.routes
    }

    pub fn trips(&self) -> &[TripRecord] {
        &self.trips
    }

    pub fn road_distances(&self) -> &RoadDistances {
        &self.road
    }

    pub fn stop(&self, idx: StopIdx) -> &Stop {
        &self.stops[idx]
    }

    pub fn route(&self, idx: RouteIdx) -> &BusRoute {
        &self.routes[idx]
    }

    pub fn stop_index(&self, stop_id: &str) -> Option<StopIdx> {
        self.stop_lookup.get(stop_id).copied()
    }

    pub fn route_index(&self, route_id: &str) -> Option<RouteIdx> {
        self.route_lookup.get(route_id).copied()
    }

    pub fn require_stop(&self, stop_id: &str) -> Result<StopIdx, NetworkError> {
        self.stop_index(stop_id)
            .ok_or_else(|| NetworkError::UnknownStop(stop_id.to_string()))
    }

    pub fn require_route(&self, route_id: &str) -> Result<RouteIdx, NetworkError> {
        self.route_index(route_id)
            .ok_or_else(|| NetworkError::UnknownRoute(route_id.to_string()))
    }

    pub fn board_stop(&self, trip: &TripRecord) -> StopIdx {
        self.routes[trip.route].stops[trip.board_pos]
    }

    pub fn alight_stop(&self, trip: &TripRecord) -> StopIdx {
        self.routes[trip.route].stops[trip.alight_pos]
    }

    /// Shortest road distance between two stops in km.
    pub fn road_distance(&self, a: StopIdx, b: StopIdx) -> f64 {
        if a == b {
            return 0.0;
        }
        self.road.lookup(a, b).unwrap_or_else(|| {
            haversine_km(self.stops[a].position(), self.stops[b].position())
                * self.road.detour_factor
        })
    }

    /// Distance driven along a route between two positions.
    pub fn route_distance(&self, route: RouteIdx, from_pos: usize, to_pos: usize) -> f64 {
        self.routes[route].stops[from_pos..=to_pos]
            .windows(2)
            .map(|w| self.road_distance(w[0], w[1]))
            .sum()
    }

    pub fn route_length(&self, route: RouteIdx) -> f64 {
        let n = self.routes[route].stops.len();
        self.route_distance(route, 0, n - 1)
    }

    /// The window spanning every trip's tap-on time, or `None` without trips.
    pub fn full_window(&self) -> Option<TimeWindow> {
        let start = self.trips.iter().map(|t| t.tap_on).min()?;
        let end = self.trips.iter().map(|t| t.tap_on).max()? + Duration::seconds(1);
        Some(TimeWindow { start, end })
    }

    /// Tap-off time of `trip`: the connecting tap-on of the same card at the alighting
    /// stop when one exists within the transfer window, otherwise the driving estimate.
    pub fn infer_tap_off_time(
        &self,
        trip: &TripRecord,
        transfer: &TransferParams,
    ) -> Result<DateTime<Utc>, NetworkError> {
        let route = self
            .routes
            .get(trip.route)
            .ok_or_else(|| NetworkError::UnknownRoute(trip.route.to_string()))?;
        if trip.alight_pos <= trip.board_pos || trip.alight_pos >= route.stops.len() {
            return Err(NetworkError::InvalidTrip(format!(
                "card `{}`: alight stop is not after the boarding stop on route `{}`",
                trip.card_id, route.route_id
            )));
        }
        let km = self.route_distance(trip.route, trip.board_pos, trip.alight_pos);
        let intermediates = trip.alight_pos - trip.board_pos - 1;
        let estimate = driving_tap_off(trip.tap_on, km, intermediates);
        let alight = route.stops[trip.alight_pos];
        let deadline = estimate + transfer.max_wait();

        let connecting = self.card_trips.get(&trip.card_id).and_then(|ids| {
            ids.iter()
                .map(|&i| &self.trips[i])
                .find(|next| next.tap_on > trip.tap_on)
                .filter(|next| self.board_stop(next) == alight && next.tap_on <= deadline)
        });
        Ok(connecting.map_or(estimate, |next| next.tap_on))
    }

    fn index_cards(&mut self) {
        let mut by_card: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, t) in self.trips.iter().enumerate() {
            by_card.entry(t.card_id.clone()).or_default().push(i);
        }
        for ids in by_card.values_mut() {
            ids.sort_by_key(|&i| (self.trips[i].tap_on, i));
        }
        self.card_trips = by_card;
    }

    fn infer_all_tap_offs(&mut self, transfer: &TransferParams) -> Result<(), NetworkError> {
        let offs = self
            .trips
            .iter()
            .map(|t| self.infer_tap_off_time(t, transfer))
            .collect::<Result<Vec<_>, _>>()?;
        for (t, off) in self.trips.iter_mut().zip(offs) {
            t.tap_off = off;
        }
        Ok(())
    }

    /// Deterministic JSON snapshot of the network (ids instead of indices).
    pub fn snapshot(&self) -> NetworkSnapshot {
        let mut road: Vec<RoadDistanceRow> = self
            .road
            .overrides
            .iter()
            .map(|(&(a, b), &km)| RoadDistanceRow {
                from_stop_id: self.stops[a].stop_id.clone(),
                to_stop_id: self.stops[b].stop_id.clone(),
                km,
            })
            .collect();
        road.sort_by(|x, y| {
            (&x.from_stop_id, &x.to_stop_id).cmp(&(&y.from_stop_id, &y.to_stop_id))
        });
        NetworkSnapshot {
            stops: self.stops.clone(),
            routes: self
                .routes
                .iter()
                .map(|r| RouteRow {
                    route_id: r.route_id.clone(),
                    stop_ids: r
                        .stops
                        .iter()
                        .map(|&s| self.stops[s].stop_id.clone())
                        .collect(),
                })
                .collect(),
            trips: self
                .trips
                .iter()
                .map(|t| TripRow {
                    card_id: t.card_id.clone(),
                    tap_on: t.tap_on,
                    route_id: self.routes[t.route].route_id.clone(),
                    board_stop_id: self.stops[self.board_stop(t)].stop_id.clone(),
                    alight_stop_id: self.stops[self.alight_stop(t)].stop_id.clone(),
                    tap_off: t.tap_off,
                })
                .collect(),
            detour_factor: self.road.detour_factor,
            road_distances: road,
        }
    }
}

/// `tap_on + km / 20 km/h + 2 min × intermediates`, rounded to the millisecond.
///
/// A zero-length hop with no intermediate stops is bumped by one second so that
/// tap-off stays strictly after tap-on.
pub fn driving_tap_off(tap_on: DateTime<Utc>, km: f64, intermediates: usize) -> DateTime<Utc> {
    let minutes = km / INFERENCE_SPEED_KMH * 60.0 + INFERENCE_DWELL_MIN * intermediates as f64;
    let ms = (minutes * 60_000.0).round() as i64;
    tap_on + Duration::milliseconds(ms.max(1000))
}

fn check_route_stops(stops: &[StopIdx], n_stops: usize) -> Result<(), String> {
    if stops.len() < 2 {
        return Err("a route needs at least two stops".into());
    }
    if stops.iter().any(|&s| s >= n_stops) {
        return Err("route references an unknown stop".into());
    }
    if stops.windows(2).any(|w| w[0] == w[1]) {
        return Err("route repeats a stop immediately".into());
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteRow {
    pub route_id: String,
    pub stop_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRow {
    pub card_id: String,
    pub tap_on: DateTime<Utc>,
    pub route_id: String,
    pub board_stop_id: String,
    pub alight_stop_id: String,
    pub tap_off: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadDistanceRow {
    pub from_stop_id: String,
    pub to_stop_id: String,
    pub km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSnapshot {
    pub stops: Vec<Stop>,
    pub routes: Vec<RouteRow>,
    pub trips: Vec<TripRow>,
    pub detour_factor: f64,
    pub road_distances: Vec<RoadDistanceRow>,
}

// ---------------------------------------------------------------------------
// CSV ingestion

pub const STOPS_HEADER: &str = "stop_id,name,lat,lon";
pub const ROUTES_HEADER: &str = "route_id,stop_ids";
pub const TRIPS_HEADER: &str = "card_id,tap_on,route_id,board_stop_id,alight_stop_id";
pub const ROAD_HEADER: &str = "from_stop_id,to_stop_id,km";

/// The CSV sources of one dataset.
pub struct DatasetSources<R> {
    pub stops: R,
    pub routes: R,
    pub trips: R,
    pub road_distances: Option<R>,
}

/// Reads, validates and indexes a dataset.
pub fn ingest_network<R: Read>(
    sources: DatasetSources<R>,
    transfer: &TransferParams,
) -> Result<(BusNetwork, IngestReport), NetworkError> {
    let mut report = IngestReport::default();

    let stop_rows = read_csv(sources.stops, "stops.csv", STOPS_HEADER)?;
    let mut stops: Vec<Stop> = Vec::with_capacity(stop_rows.len());
    let mut stop_lookup: HashMap<String, StopIdx> = HashMap::with_capacity(stop_rows.len());
    for row in stop_rows {
        match parse_stop(&row.fields) {
            Ok(stop) if stop_lookup.contains_key(&stop.stop_id) => {
                report.dropped_stops += 1;
                report.record("stops.csv", row.line, format!("duplicate stop id `{}`", stop.stop_id));
            }
            Ok(stop) => {
                stop_lookup.insert(stop.stop_id.clone(), stops.len());
                stops.push(stop);
            }
            Err(reason) => {
                report.dropped_stops += 1;
                report.record("stops.csv", row.line, reason);
            }
        }
    }
    if stops.is_empty() {
        return Err(NetworkError::EmptyStops);
    }

    let mut routes: Vec<BusRoute> = Vec::new();
    let mut route_lookup: HashMap<String, RouteIdx> = HashMap::new();
    for row in read_csv(sources.routes, "routes.csv", ROUTES_HEADER)? {
        let parsed = parse_route(&row.fields, &stop_lookup, stops.len());
        match parsed {
            Ok(route) if route_lookup.contains_key(&route.route_id) => {
                report.dropped_routes += 1;
                report.record("routes.csv", row.line, format!("duplicate route id `{}`", route.route_id));
            }
            Ok(route) => {
                route_lookup.insert(route.route_id.clone(), routes.len());
                routes.push(route);
            }
            Err(reason) => {
                report.dropped_routes += 1;
                report.record("routes.csv", row.line, reason);
            }
        }
    }

    let mut trips: Vec<TripRecord> = Vec::new();
    for row in read_csv(sources.trips, "trips.csv", TRIPS_HEADER)? {
        match parse_trip(&row.fields, &stop_lookup, &route_lookup, &routes) {
            Ok(trip) => trips.push(trip),
            Err(reason) => {
                report.dropped_trips += 1;
                report.record("trips.csv", row.line, reason);
            }
        }
    }

    let mut road = RoadDistances::default();
    if let Some(src) = sources.road_distances {
        for row in read_csv(src, "road_distances.csv", ROAD_HEADER)? {
            match parse_road(&row.fields, &stop_lookup) {
                Ok((a, b, km)) => road.set(a, b, km),
                Err(reason) => {
                    report.dropped_road_distances += 1;
                    report.record("road_distances.csv", row.line, reason);
                }
            }
        }
    }

    let network = BusNetwork::from_parts(stops, routes, trips, road, transfer)?;
    Ok((network, report))
}

/// Loads `stops.csv`, `routes.csv`, `trips.csv` and the optional `road_distances.csv`
/// from a directory.
pub fn load_dataset_dir(
    dir: &Path,
    transfer: &TransferParams,
) -> Result<(BusNetwork, IngestReport), NetworkError> {
    let open = |name: &str| -> Result<File, NetworkError> {
        let path = dir.join(name);
        File::open(&path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let road_path = dir.join("road_distances.csv");
    let road_distances = if road_path.exists() {
        Some(open("road_distances.csv")?)
    } else {
        None
    };
    ingest_network(
        DatasetSources {
            stops: open("stops.csv")?,
            routes: open("routes.csv")?,
            trips: open("trips.csv")?,
            road_distances,
        },
        transfer,
    )
}

struct CsvRow {
    line: u64,
    fields: Vec<String>,
}

fn read_csv<R: Read>(
    src: R,
    file: &'static str,
    expected: &'static str,
) -> Result<Vec<CsvRow>, NetworkError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(src);
    let mut records = reader.byte_records();
    let header_ok = match records.next() {
        Some(Ok(rec)) => {
            let fields: Vec<String> = rec
                .iter()
                .map(|f| String::from_utf8_lossy(f).trim().to_string())
                .collect();
            let mut joined = fields.join(",");
            if let Some(stripped) = joined.strip_prefix('\u{feff}') {
                joined = stripped.to_string();
            }
            joined == expected
        }
        _ => false,
    };
    if !header_ok {
        return Err(NetworkError::MalformedHeader {
            file,
            line: 1,
            expected,
        });
    }
    let width = expected.split(',').count();
    let mut rows = Vec::new();
    let mut line = 1u64;
    for rec in records {
        line += 1;
        let Ok(rec) = rec else {
            rows.push(CsvRow {
                line,
                fields: Vec::new(),
            });
            continue;
        };
        if let Some(pos) = rec.position() {
            line = pos.line();
        }
        if rec.len() == 1 && rec.get(0).is_some_and(|f| f.is_empty()) {
            continue;
        }
        let fields = rec
            .iter()
            .map(|f| std::str::from_utf8(f).map(|s| s.trim().to_string()))
            .collect::<Result<Vec<_>, _>>()
            .unwrap_or_default();
        rows.push(CsvRow {
            line,
            fields: if fields.len() == width { fields } else { Vec::new() },
        });
    }
    Ok(rows)
}

fn parse_stop(f: &[String]) -> Result<Stop, String> {
    let [id, name, lat, lon] = f else {
        return Err("wrong field count or invalid UTF-8".into());
    };
    if id.is_empty() {
        return Err("empty stop id".into());
    }
    let lat: f64 = lat.parse().map_err(|_| format!("bad latitude `{lat}`"))?;
    let lon: f64 = lon.parse().map_err(|_| format!("bad longitude `{lon}`"))?;
    let stop = Stop {
        stop_id: id.clone(),
        name: name.clone(),
        lat,
        lon,
    };
    if !stop.position().is_valid() {
        return Err(format!("coordinates out of range ({lat}, {lon})"));
    }
    Ok(stop)
}

fn parse_route(
    f: &[String],
    stop_lookup: &HashMap<String, StopIdx>,
    n_stops: usize,
) -> Result<BusRoute, String> {
    let [id, stop_ids] = f else {
        return Err("wrong field count or invalid UTF-8".into());
    };
    if id.is_empty() {
        return Err("empty route id".into());
    }
    let stops = stop_ids
        .split('|')
        .map(|s| {
            let s = s.trim();
            stop_lookup
                .get(s)
                .copied()
                .ok_or_else(|| format!("unknown stop `{s}`"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_route_stops(&stops, n_stops)?;
    Ok(BusRoute {
        route_id: id.clone(),
        stops,
    })
}

fn parse_trip(
    f: &[String],
    stop_lookup: &HashMap<String, StopIdx>,
    route_lookup: &HashMap<String, RouteIdx>,
    routes: &[BusRoute],
) -> Result<TripRecord, String> {
    let [card, tap_on, route_id, board, alight] = f else {
        return Err("wrong field count or invalid UTF-8".into());
    };
    if card.is_empty() {
        return Err("empty card id".into());
    }
    let tap_on = parse_timestamp(tap_on).ok_or_else(|| format!("bad timestamp `{tap_on}`"))?;
    let route = *route_lookup
        .get(route_id.as_str())
        .ok_or_else(|| format!("unknown route `{route_id}`"))?;
    let board = *stop_lookup
        .get(board.as_str())
        .ok_or_else(|| format!("unknown stop `{board}`"))?;
    let alight = *stop_lookup
        .get(alight.as_str())
        .ok_or_else(|| format!("unknown stop `{alight}`"))?;
    let stops = &routes[route].stops;
    let board_pos = stops
        .iter()
        .position(|&s| s == board)
        .ok_or_else(|| format!("boarding stop not on route `{route_id}`"))?;
    let alight_pos = stops[board_pos + 1..]
        .iter()
        .position(|&s| s == alight)
        .map(|p| p + board_pos + 1)
        .ok_or_else(|| format!("alighting stop does not follow boarding stop on `{route_id}`"))?;
    Ok(TripRecord {
        card_id: card.clone(),
        tap_on,
        route,
        board_pos,
        alight_pos,
        tap_off: tap_on,
    })
}

fn parse_road(
    f: &[String],
    stop_lookup: &HashMap<String, StopIdx>,
) -> Result<(StopIdx, StopIdx, f64), String> {
    let [from, to, km] = f else {
        return Err("wrong field count or invalid UTF-8".into());
    };
    let a = *stop_lookup.get(from.as_str()).ok_or_else(|| format!("unknown stop `{from}`"))?;
    let b = *stop_lookup.get(to.as_str()).ok_or_else(|| format!("unknown stop `{to}`"))?;
    let km: f64 = km.parse().map_err(|_| format!("bad distance `{km}`"))?;
    if !km.is_finite() || km < 0.0 {
        return Err(format!("distance must be finite and non-negative, got {km}"));
    }
    Ok((a, b, km))
}

/// Parses an ISO-8601 timestamp. Offsets are honoured; naive timestamps are UTC.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|n| n.and_utc())
}

// ---------------------------------------------------------------------------
// Demand

/// Origin-destination passenger counts over a time window.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    pub window: TimeWindow,
    pub counts: BTreeMap<(StopIdx, StopIdx), u64>,
}

impl DemandMatrix {
    pub fn empty(window: TimeWindow) -> Self {
        Self {
            window,
            counts: BTreeMap::new(),
        }
    }

    pub fn get(&self, origin: StopIdx, destination: StopIdx) -> u64 {
        self.counts.get(&(origin, destination)).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

/// Counts in-window trips per (origin, destination) stop pair. With a positive
/// catchment radius a trip counts for every stop pair whose stops lie within the
/// radius of its boarding and alighting stops.
pub fn build_demand_matrix(
    network: &BusNetwork,
    window: TimeWindow,
    catchment_radius_m: f64,
) -> Result<DemandMatrix, NetworkError> {
    if !catchment_radius_m.is_finite() || catchment_radius_m < 0.0 {
        return Err(NetworkError::Parameter(format!(
            "catchment radius must be a non-negative number of metres, got {catchment_radius_m}"
        )));
    }
    if window.start >= window.end {
        return Err(NetworkError::Parameter("time window must be non-empty".into()));
    }
    let mut counts: BTreeMap<(StopIdx, StopIdx), u64> = BTreeMap::new();
    let in_window = network.trips().iter().filter(|t| window.contains(t.tap_on));
    if catchment_radius_m == 0.0 {
        for t in in_window {
            *counts
                .entry((network.board_stop(t), network.alight_stop(t)))
                .or_default() += 1;
        }
    } else {
        let grid = StopGrid::new(network, catchment_radius_m / 1000.0);
        let mut cache: HashMap<StopIdx, Vec<StopIdx>> = HashMap::new();
        let mut near = |s: StopIdx| -> Vec<StopIdx> {
            cache
                .entry(s)
                .or_insert_with(|| grid.within(network, s, catchment_radius_m / 1000.0))
                .clone()
        };
        for t in in_window {
            let origins = near(network.board_stop(t));
            let destinations = near(network.alight_stop(t));
            for &u in &origins {
                for &v in &destinations {
                    *counts.entry((u, v)).or_default() += 1;
                }
            }
        }
    }
    Ok(DemandMatrix { window, counts })
}

/// Uniform lat/lon bucket index for radius queries over network stops.
struct StopGrid {
    cell_lat: f64,
    cell_lon: f64,
    buckets: HashMap<(i64, i64), Vec<StopIdx>>,
}

impl StopGrid {
    fn new(network: &BusNetwork, radius_km: f64) -> Self {
        let max_abs_lat = network
            .stops()
            .iter()
            .map(|s| s.lat.abs())
            .fold(0.0, f64::max)
            .min(89.0);
        // Cells at least one radius wide everywhere in the network's latitude band.
        let cell_lat = (radius_km / 110.0).max(1e-9) * 1.05;
        let cell_lon = (radius_km / (111.0 * max_abs_lat.to_radians().cos())).max(1e-9) * 1.05;
        let mut buckets: HashMap<(i64, i64), Vec<StopIdx>> = HashMap::new();
        for (i, s) in network.stops().iter().enumerate() {
            buckets
                .entry(((s.lat / cell_lat).floor() as i64, (s.lon / cell_lon).floor() as i64))
                .or_default()
                .push(i);
        }
        Self {
            cell_lat,
            cell_lon,
            buckets,
        }
    }

    fn within(&self, network: &BusNetwork, center: StopIdx, radius_km: f64) -> Vec<StopIdx> {
        let c = network.stop(center);
        let (ci, cj) = (
            (c.lat / self.cell_lat).floor() as i64,
            (c.lon / self.cell_lon).floor() as i64,
        );
        let mut out = Vec::new();
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(bucket) = self.buckets.get(&(ci + di, cj + dj)) {
                    out.extend(bucket.iter().copied().filter(|&s| {
                        haversine_km(c.position(), network.stop(s).position()) <= radius_km
                    }));
                }
            }
        }
        out.sort_unstable();
        out
    }
}
