//! Small geodesy helpers shared by the network model and the analytics.

use serde::{Deserialize, Serialize};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Great-circle distance in kilometres.
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let (la1, la2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = la2 - la1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + la1.cos() * la2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Initial bearing from `a` to `b` in degrees, clockwise from north, in `[0, 360)`.
pub fn bearing_deg(a: LatLon, b: LatLon) -> f64 {
    let (la1, la2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlon = (b.lon - a.lon).to_radians();
    let y = dlon.sin() * la2.cos();
    let x = la1.cos() * la2.sin() - la1.sin() * la2.cos() * dlon.cos();
    let deg = y.atan2(x).to_degrees();
    deg.rem_euclid(360.0)
}

/// Compass sector (0 = north, clockwise) for a bearing, with `sectors` equal sectors
/// centred on their nominal direction.
pub fn bearing_sector(bearing: f64, sectors: usize) -> usize {
    let width = 360.0 / sectors as f64;
    (((bearing + width / 2.0) / width).floor() as usize) % sectors
}

/// Local equirectangular projection to kilometres around a reference latitude.
///
/// The mapping is affine in (lon, lat), so straight lines and point-in-polygon
/// relations carry over between the two coordinate systems.
#[derive(Debug, Clone, Copy)]
pub struct LocalProjection {
    lat0: f64,
    lon0: f64,
    kx: f64,
    ky: f64,
}

impl LocalProjection {
    pub fn around(points: impl IntoIterator<Item = LatLon>) -> Self {
        let (mut n, mut slat, mut slon) = (0usize, 0.0, 0.0);
        for p in points {
            n += 1;
            slat += p.lat;
            slon += p.lon;
        }
        let (lat0, lon0) = if n == 0 {
            (0.0, 0.0)
        } else {
            (slat / n as f64, slon / n as f64)
        };
        let ky = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        let kx = ky * lat0.to_radians().cos().max(1e-6);
        Self { lat0, lon0, kx, ky }
    }

    pub fn forward(&self, p: LatLon) -> [f64; 2] {
        [(p.lon - self.lon0) * self.kx, (p.lat - self.lat0) * self.ky]
    }

    pub fn inverse(&self, xy: [f64; 2]) -> LatLon {
        LatLon {
            lat: self.lat0 + xy[1] / self.ky,
            lon: self.lon0 + xy[0] / self.kx,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_degree_of_latitude() {
        let d = haversine_km(LatLon::new(0.0, 0.0), LatLon::new(1.0, 0.0));
        assert!((d - 111.195).abs() < 0.01, "{d}");
    }

    #[test]
    fn bearings_and_sectors() {
        let o = LatLon::new(0.0, 0.0);
        let east = bearing_deg(o, LatLon::new(0.0, 0.1));
        assert!((east - 90.0).abs() < 1e-9);
        assert_eq!(bearing_sector(east, 16), 4);
        assert_eq!(bearing_sector(359.0, 16), 0);
        assert_eq!(bearing_sector(bearing_deg(o, LatLon::new(-0.1, 0.0)), 16), 8);
    }

    #[test]
    fn projection_round_trips() {
        let pts = [LatLon::new(39.9, 116.4), LatLon::new(40.0, 116.5)];
        let proj = LocalProjection::around(pts);
        for p in pts {
            let q = proj.inverse(proj.forward(p));
            assert!((p.lat - q.lat).abs() < 1e-12 && (p.lon - q.lon).abs() < 1e-12);
        }
    }
}
