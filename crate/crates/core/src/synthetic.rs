//! Synthetic networks for tests, benchmarks and demos.
//!
//! Stops are laid out on a local kilometre plane near (0°, 0°). The planar
//! builders pin every pairwise road distance to the exact Euclidean distance so
//! that expected values can be written down by hand.

use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geo::LocalProjection;
use crate::network::{BusNetwork, BusRoute, RoadDistances, Stop, TransferParams, TripRecord};

/// Stop at planar position `(x, y)` km.
pub fn planar_stop(id: &str, x: f64, y: f64) -> Stop {
    let p = LocalProjection::around(std::iter::empty()).inverse([x, y]);
    Stop {
        stop_id: id.to_string(),
        name: id.to_string(),
        lat: p.lat,
        lon: p.lon,
    }
}

/// Network without routes whose road distances are exact planar distances.
pub fn planar_network(points: &[(&str, f64, f64)]) -> Arc<BusNetwork> {
    planar_network_with(points, &[])
}

/// Like [`planar_network`], with some road distances replaced.
pub fn planar_network_with(points: &[(&str, f64, f64)], overrides: &[(&str, &str, f64)]) -> Arc<BusNetwork> {
    let stops: Vec<Stop> = points.iter().map(|&(id, x, y)| planar_stop(id, x, y)).collect();
    let mut road = RoadDistances::default();
    for (i, a) in points.iter().enumerate() {
        for (j, b) in points.iter().enumerate().skip(i + 1) {
            road.set(i, j, (a.1 - b.1).hypot(a.2 - b.2));
        }
    }
    let pos = |id: &str| points.iter().position(|p| p.0 == id).expect("known stop");
    for &(a, b, km) in overrides {
        road.set(pos(a), pos(b), km);
        road.set(pos(b), pos(a), km);
    }
    Arc::new(
        BusNetwork::from_parts(stops, Vec::new(), Vec::new(), road, &TransferParams::default())
            .expect("valid synthetic network"),
    )
}

/// Stops `s0, s1, ...` on a straight line at the given kilometre marks.
pub fn line_network(marks: &[f64]) -> Arc<BusNetwork> {
    let ids: Vec<String> = (0..marks.len()).map(|i| format!("s{i}")).collect();
    let points: Vec<(&str, f64, f64)> = ids
        .iter()
        .zip(marks)
        .map(|(id, &x)| (id.as_str(), x, 0.0))
        .collect();
    planar_network(&points)
}

/// Size of a random city.
#[derive(Debug, Clone, Copy)]
pub struct CitySpec {
    pub stops: usize,
    pub routes: usize,
    pub trips: usize,
    /// Side of the square service area, km.
    pub extent_km: f64,
    pub stops_per_route: usize,
    pub days: i64,
}

impl Default for CitySpec {
    fn default() -> Self {
        Self {
            stops: 200,
            routes: 20,
            trips: 5000,
            extent_km: 10.0,
            stops_per_route: 12,
            days: 7,
        }
    }
}

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 4, 0, 0, 0).unwrap()
}

/// Random city: uniformly scattered stops, routes that walk toward a random
/// terminal through nearby stops, and trips on those routes starting at [`epoch`].
/// Road distances default to great-circle times the detour factor.
pub fn random_city(seed: u64, spec: CitySpec) -> (Vec<Stop>, Vec<BusRoute>, Vec<TripRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xy: Vec<[f64; 2]> = (0..spec.stops)
        .map(|_| {
            [
                rng.random_range(0.0..spec.extent_km),
                rng.random_range(0.0..spec.extent_km),
            ]
        })
        .collect();
    let stops: Vec<Stop> = xy
        .iter()
        .enumerate()
        .map(|(i, p)| planar_stop(&format!("S{i:05}"), p[0], p[1]))
        .collect();

    let mut routes = Vec::with_capacity(spec.routes);
    for r in 0..spec.routes {
        let mut path = vec![rng.random_range(0..spec.stops)];
        let goal = xy[rng.random_range(0..spec.stops)];
        while path.len() < spec.stops_per_route.min(spec.stops) {
            let cur = xy[*path.last().unwrap()];
            let step = [goal[0] - cur[0], goal[1] - cur[1]];
            let norm = step[0].hypot(step[1]).max(1e-9);
            let want = [
                cur[0] + step[0] / norm * 0.8 + rng.random_range(-0.5..0.5),
                cur[1] + step[1] / norm * 0.8 + rng.random_range(-0.5..0.5),
            ];
            let next = (0..spec.stops)
                .filter(|s| !path.contains(s))
                .min_by(|&a, &b| {
                    let da = (xy[a][0] - want[0]).hypot(xy[a][1] - want[1]);
                    let db = (xy[b][0] - want[0]).hypot(xy[b][1] - want[1]);
                    da.total_cmp(&db)
                });
            match next {
                Some(n) => path.push(n),
                None => break,
            }
        }
        if path.len() < 2 {
            continue;
        }
        routes.push(BusRoute {
            route_id: format!("R{r:04}"),
            stops: path,
        });
    }

    let start = epoch();
    let span_ms = spec.days.max(1) * 86_400_000;
    let mut trips = Vec::with_capacity(spec.trips);
    if !routes.is_empty() {
        for t in 0..spec.trips {
            let route = rng.random_range(0..routes.len());
            let len = routes[route].stops.len();
            let board = rng.random_range(0..len - 1);
            let alight = rng.random_range(board + 1..len);
            let tap_on = start + Duration::milliseconds(rng.random_range(0..span_ms));
            trips.push(TripRecord {
                card_id: format!("C{:06}", t % (spec.trips / 3).max(1)),
                tap_on,
                route,
                board_pos: board,
                alight_pos: alight,
                tap_off: tap_on,
            });
        }
    }
    (stops, routes, trips)
}

/// [`random_city`] assembled into a network.
pub fn random_network(seed: u64, spec: CitySpec) -> Arc<BusNetwork> {
    let (stops, routes, trips) = random_city(seed, spec);
    Arc::new(
        BusNetwork::from_parts(
            stops,
            routes,
            trips,
            RoadDistances::default(),
            &TransferParams::default(),
        )
        .expect("valid synthetic network"),
    )
}

/// Writes a city as the four dataset CSV files into `dir`.
pub fn write_dataset(
    dir: &std::path::Path,
    stops: &[Stop],
    routes: &[BusRoute],
    trips: &[TripRecord],
) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("stops.csv"))?);
    writeln!(f, "{}", crate::network::STOPS_HEADER)?;
    for s in stops {
        writeln!(f, "{},{},{:.8},{:.8}", s.stop_id, s.name, s.lat, s.lon)?;
    }
    f.flush()?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("routes.csv"))?);
    writeln!(f, "{}", crate::network::ROUTES_HEADER)?;
    for r in routes {
        let ids: Vec<&str> = r.stops.iter().map(|&s| stops[s].stop_id.as_str()).collect();
        writeln!(f, "{},{}", r.route_id, ids.join("|"))?;
    }
    f.flush()?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("trips.csv"))?);
    writeln!(f, "{}", crate::network::TRIPS_HEADER)?;
    for t in trips {
        let r = &routes[t.route];
        writeln!(
            f,
            "{},{},{},{},{}",
            t.card_id,
            t.tap_on.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            r.route_id,
            stops[r.stops[t.board_pos]].stop_id,
            stops[r.stops[t.alight_pos]].stop_id
        )?;
    }
    f.flush()
}
