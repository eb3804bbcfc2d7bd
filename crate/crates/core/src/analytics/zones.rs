use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::voronoi::{self, Point, Polygon};
use super::AnalyticsError;
use crate::geo::{LatLon, LocalProjection};
use crate::network::{BusNetwork, StopIdx};

/// A polygon in geographic coordinates; rings are open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoPolygon {
    pub outer: Vec<LatLon>,
    pub holes: Vec<Vec<LatLon>>,
}

impl GeoPolygon {
    fn from_planar(p: &Polygon, proj: &LocalProjection) -> Self {
        let ring = |r: &[Point]| r.iter().map(|&xy| proj.inverse(xy)).collect::<Vec<_>>();
        Self {
            outer: ring(&p.outer),
            holes: p.holes.iter().map(|h| ring(h)).collect(),
        }
    }

    fn planar(&self) -> Polygon {
        let ring = |r: &[LatLon]| r.iter().map(|p| [p.lon, p.lat]).collect::<Vec<_>>();
        Polygon {
            outer: ring(&self.outer),
            holes: self.holes.iter().map(|h| ring(h)).collect(),
        }
    }

    /// Point-in-polygon; the boundary counts as inside.
    pub fn contains(&self, p: LatLon) -> bool {
        voronoi::polygon_contains(&self.planar(), [p.lon, p.lat])
    }

    fn coordinates(&self) -> Value {
        let ring = |r: &[LatLon]| {
            let mut pts: Vec<[f64; 2]> = r.iter().map(|p| [p.lon, p.lat]).collect();
            if let Some(&first) = pts.first() {
                pts.push(first);
            }
            pts
        };
        let mut rings = vec![ring(&self.outer)];
        rings.extend(self.holes.iter().map(|h| ring(h)));
        json!(rings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub zone_id: String,
    pub stops: Vec<StopIdx>,
    pub stop_ids: Vec<String>,
    pub centroid: LatLon,
    pub boundary: Vec<GeoPolygon>,
}

impl Zone {
    pub fn contains(&self, p: LatLon) -> bool {
        self.boundary.iter().any(|poly| poly.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePartition {
    pub zones: Vec<Zone>,
    /// Zone position in `zones` for every network stop.
    pub zone_of: Vec<usize>,
}

impl ZonePartition {
    pub fn zone(&self, zone_id: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.zone_id == zone_id)
    }

    /// GeoJSON FeatureCollection with one MultiPolygon feature per zone. `extra`
    /// supplies additional properties per zone position.
    pub fn to_geojson(&self, extra: impl Fn(usize) -> Option<Value>) -> Value {
        let features: Vec<Value> = self
            .zones
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let mut props = json!({
                    "zone_id": z.zone_id,
                    "stop_ids": z.stop_ids,
                    "stop_count": z.stops.len(),
                    "centroid": [z.centroid.lon, z.centroid.lat],
                });
                if let (Some(Value::Object(more)), Value::Object(p)) = (extra(i), &mut props) {
                    p.extend(more);
                }
                json!({
                    "type": "Feature",
                    "geometry": {
                        "type": "MultiPolygon",
                        "coordinates": z.boundary.iter().map(GeoPolygon::coordinates).collect::<Vec<_>>(),
                    },
                    "properties": props,
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }
}

/// Size-balanced divisive clustering: each group of `k` clusters is cut along its
/// principal axis into halves of `⌊k/2⌋` and `⌈k/2⌉` clusters, with the point count
/// split in the same proportion.
pub(crate) fn balanced_clusters(points: &[Point], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(k);
    split(points, (0..points.len()).collect(), k, &mut out);
    out
}

fn split(points: &[Point], mut members: Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        members.sort_unstable();
        out.push(members);
        return;
    }
    let axis = principal_axis(points, &members);
    let proj = |i: usize| points[i][0] * axis[0] + points[i][1] * axis[1];
    members.sort_by(|&a, &b| proj(a).total_cmp(&proj(b)).then(a.cmp(&b)));
    let k1 = k / 2;
    let cut = members.len() * k1 / k;
    let right = members.split_off(cut);
    split(points, members, k1, out);
    split(points, right, k - k1, out);
}

fn principal_axis(points: &[Point], members: &[usize]) -> Point {
    let n = members.len() as f64;
    let (mx, my) = members.iter().fold((0.0, 0.0), |(x, y), &i| (x + points[i][0], y + points[i][1]));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &i in members {
        let (dx, dy) = (points[i][0] - mx, points[i][1] - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let half = (sxx - syy) / 2.0;
    let lambda = (sxx + syy) / 2.0 + (half * half + sxy * sxy).sqrt();
    let v = if sxx >= syy { [lambda - syy, sxy] } else { [sxy, lambda - sxx] };
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if norm < 1e-300 {
        return [1.0, 0.0];
    }
    let sign = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) { -1.0 } else { 1.0 };
    [sign * v[0] / norm, sign * v[1] / norm]
}

/// Partitions the stops into `zone_count` balanced zones bounded by the union of
/// their Voronoi cells.
pub fn compute_zones(network: &BusNetwork, zone_count: usize) -> Result<ZonePartition, AnalyticsError> {
    let stops = network.stops();
    if zone_count == 0 || zone_count > stops.len() {
        return Err(AnalyticsError::Params(format!(
            "zone count must be between 1 and the number of stops ({}), got {zone_count}",
            stops.len()
        )));
    }
    let proj = LocalProjection::around(stops.iter().map(|s| s.position()));
    let points: Vec<Point> = stops.iter().map(|s| proj.forward(s.position())).collect();
    let clusters = balanced_clusters(&points, zone_count);
    let mut zone_of = vec![0; stops.len()];
    for (z, members) in clusters.iter().enumerate() {
        for &i in members {
            zone_of[i] = z;
        }
    }

    // Coincident stops share one Voronoi site owned by the first of them.
    let mut sites: Vec<Point> = Vec::new();
    let mut site_of = vec![0; stops.len()];
    let mut seen = std::collections::HashMap::new();
    for (i, p) in points.iter().enumerate() {
        let key = (p[0].to_bits(), p[1].to_bits());
        site_of[i] = *seen.entry(key).or_insert_with(|| {
            sites.push(*p);
            sites.len() - 1
        });
    }
    let mut site_zone = vec![usize::MAX; sites.len()];
    for i in 0..stops.len() {
        if site_zone[site_of[i]] == usize::MAX {
            site_zone[site_of[i]] = zone_of[i];
        }
    }

    let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &sites {
        for d in 0..2 {
            min[d] = min[d].min(p[d]);
            max[d] = max[d].max(p[d]);
        }
    }
    let pad = ((max[0] - min[0]).max(max[1] - min[1]) * 0.05).max(0.1);
    let (min, max) = ([min[0] - pad, min[1] - pad], [max[0] + pad, max[1] + pad]);
    let cells = voronoi::voronoi_cells(&sites, min, max);

    let zones = clusters
        .iter()
        .enumerate()
        .map(|(z, members)| {
            let owned: Vec<usize> = (0..sites.len()).filter(|&s| site_zone[s] == z).collect();
            let boundary = if owned.is_empty() {
                Vec::new()
            } else {
                voronoi::union_cells(&cells, &owned, &site_zone)
                    .iter()
                    .map(|p| GeoPolygon::from_planar(p, &proj))
                    .collect()
            };
            let n = members.len() as f64;
            let (lat, lon) = members.iter().fold((0.0, 0.0), |(a, b), &i| (a + stops[i].lat, b + stops[i].lon));
            Zone {
                zone_id: format!("z{z}"),
                stops: members.clone(),
                stop_ids: members.iter().map(|&i| stops[i].stop_id.clone()).collect(),
                centroid: LatLon::new(lat / n, lon / n),
                boundary,
            }
        })
        .collect();
    Ok(ZonePartition { zones, zone_of })
}
