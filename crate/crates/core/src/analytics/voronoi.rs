//! Bounded Voronoi cells in a planar (projected) coordinate system and unions of
//! cells into polygons with holes.

use std::collections::HashMap;

pub type Point = [f64; 2];

/// Which neighbour produced a cell edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeSource {
    Bounds,
    Site(usize),
}

/// Convex polygon, counter-clockwise; `edges[i]` is the source of the edge from
/// `vertices[i]` to `vertices[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub vertices: Vec<Point>,
    pub edges: Vec<EdgeSource>,
}

impl Cell {
    fn rect(min: Point, max: Point) -> Self {
        Self {
            vertices: vec![min, [max[0], min[1]], max, [min[0], max[1]]],
            edges: vec![EdgeSource::Bounds; 4],
        }
    }

    /// Keeps the part where `(p - a) · n <= c`, labelling the new edge `source`.
    fn clip(&mut self, n: Point, c: f64, source: EdgeSource) {
        let m = self.vertices.len();
        if m == 0 {
            return;
        }
        let side = |p: Point| p[0] * n[0] + p[1] * n[1] - c;
        let mut vertices = Vec::with_capacity(m + 1);
        let mut edges = Vec::with_capacity(m + 1);
        for i in 0..m {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % m]);
            let (sp, sq) = (side(p), side(q));
            let cross = |t: f64| [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])];
            match (sp <= 0.0, sq <= 0.0) {
                (true, true) => {
                    vertices.push(p);
                    edges.push(self.edges[i]);
                }
                (true, false) => {
                    vertices.push(p);
                    edges.push(self.edges[i]);
                    vertices.push(cross(sp / (sp - sq)));
                    edges.push(source);
                }
                (false, true) => {
                    vertices.push(cross(sp / (sp - sq)));
                    edges.push(self.edges[i]);
                }
                (false, false) => {}
            }
        }
        // Drop degenerate edges left by clipping through a vertex.
        let mut i = 0;
        while vertices.len() > 2 && i < vertices.len() {
            let j = (i + 1) % vertices.len();
            if dist2(vertices[i], vertices[j]) < 1e-24 {
                vertices.remove(i);
                edges.remove(i);
            } else {
                i += 1;
            }
        }
        if vertices.len() < 3 {
            vertices.clear();
            edges.clear();
        }
        self.vertices = vertices;
        self.edges = edges;
    }

    pub fn contains(&self, p: Point, eps: f64) -> bool {
        let m = self.vertices.len();
        (0..m).all(|i| {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % m]);
            (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -eps
        })
    }
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Uniform bucket grid for nearest-first site enumeration.
struct Grid {
    min: Point,
    size: f64,
    cols: i64,
    rows: i64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(sites: &[Point], min: Point, max: Point) -> Self {
        let area = ((max[0] - min[0]) * (max[1] - min[1])).max(1e-12);
        let size = (area / sites.len().max(1) as f64).sqrt().max(1e-9) * 2.0;
        let cols = (((max[0] - min[0]) / size).ceil() as i64).max(1);
        let rows = (((max[1] - min[1]) / size).ceil() as i64).max(1);
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut grid = Self {
            min,
            size,
            cols,
            rows,
            buckets: HashMap::new(),
        };
        for (i, &p) in sites.iter().enumerate() {
            buckets.entry(grid.key(p)).or_default().push(i);
        }
        grid.buckets = buckets;
        grid
    }

    fn key(&self, p: Point) -> (i64, i64) {
        (
            (((p[0] - self.min[0]) / self.size).floor() as i64).clamp(0, self.cols - 1),
            (((p[1] - self.min[1]) / self.size).floor() as i64).clamp(0, self.rows - 1),
        )
    }

    /// Sites in the square ring at Chebyshev distance `r` around bucket `c`.
    fn ring(&self, c: (i64, i64), r: i64, out: &mut Vec<usize>) {
        out.clear();
        for dx in -r..=r {
            for dy in -r..=r {
                if dx.abs() != r && dy.abs() != r {
                    continue;
                }
                if let Some(b) = self.buckets.get(&(c.0 + dx, c.1 + dy)) {
                    out.extend_from_slice(b);
                }
            }
        }
    }

    fn max_ring(&self) -> i64 {
        self.cols.max(self.rows)
    }
}

/// Voronoi cells of distinct `sites`, clipped to the rectangle `[min, max]`.
pub fn voronoi_cells(sites: &[Point], min: Point, max: Point) -> Vec<Cell> {
    let grid = Grid::new(sites, min, max);
    let mut ring = Vec::new();
    sites
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut cell = Cell::rect(min, max);
            let home = grid.key(s);
            for r in 0..=grid.max_ring() {
                // Sites in ring r are at least (r - 1) buckets away; once that exceeds
                // twice the cell radius no further bisector can cut the cell.
                let reach = cell
                    .vertices
                    .iter()
                    .map(|&v| dist2(v, s))
                    .fold(0.0, f64::max)
                    .sqrt();
                if (r - 1) as f64 * grid.size > 2.0 * reach {
                    break;
                }
                grid.ring(home, r, &mut ring);
                for &j in &ring {
                    if j == i {
                        continue;
                    }
                    let o = sites[j];
                    if dist2(o, s) == 0.0 {
                        continue;
                    }
                    let n = [o[0] - s[0], o[1] - s[1]];
                    let mid = [(o[0] + s[0]) / 2.0, (o[1] + s[1]) / 2.0];
                    cell.clip(n, n[0] * mid[0] + n[1] * mid[1], EdgeSource::Site(j));
                }
            }
            cell
        })
        .collect()
}

/// A polygon as an outer ring (counter-clockwise) and holes (clockwise); rings are
/// open (first vertex not repeated).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub outer: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
}

/// Union of the cells whose sites belong to `group`, given `zone_of` for all sites.
/// Edges between two sites of the same group cancel; the rest are chained into rings.
pub fn union_cells(cells: &[Cell], members: &[usize], zone_of: &[usize]) -> Vec<Polygon> {
    let zone = zone_of[members[0]];
    let mut segs: Vec<(Point, Point)> = Vec::new();
    for &i in members {
        let c = &cells[i];
        let m = c.vertices.len();
        for k in 0..m {
            let internal = matches!(c.edges[k], EdgeSource::Site(j) if zone_of[j] == zone);
            if !internal {
                segs.push((c.vertices[k], c.vertices[(k + 1) % m]));
            }
        }
    }
    let scale = segs
        .iter()
        .flat_map(|(a, b)| [a[0].abs(), a[1].abs(), b[0].abs(), b[1].abs()])
        .fold(1.0, f64::max);
    let tol = 1e-7 * scale;
    let key = |p: Point| ((p[0] / tol).round() as i64, (p[1] / tol).round() as i64);
    let mut starts: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, (a, _)) in segs.iter().enumerate() {
        starts.entry(key(*a)).or_default().push(i);
    }
    let mut used = vec![false; segs.len()];
    let find_next = |p: Point, used: &[bool], starts: &HashMap<(i64, i64), Vec<usize>>| -> Option<usize> {
        let (kx, ky) = key(p);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(list) = starts.get(&(kx + dx, ky + dy)) {
                    for &j in list {
                        if used[j] {
                            continue;
                        }
                        let d = dist2(segs[j].0, p);
                        if d <= (2.0 * tol).powi(2) && best.is_none_or(|(_, bd)| d < bd) {
                            best = Some((j, d));
                        }
                    }
                }
            }
        }
        best.map(|(j, _)| j)
    };
    let mut rings: Vec<Vec<Point>> = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut ring = vec![segs[start].0];
        let mut end = segs[start].1;
        while let Some(j) = find_next(end, &used, &starts) {
            used[j] = true;
            ring.push(segs[j].0);
            end = segs[j].1;
        }
        let ring = simplify_ring(ring);
        if ring.len() >= 3 && signed_area(&ring).abs() > tol * tol {
            rings.push(ring);
        }
    }
    let (outers, holes): (Vec<_>, Vec<_>) = rings.into_iter().partition(|r| signed_area(r) > 0.0);
    let mut polygons: Vec<Polygon> = outers
        .into_iter()
        .map(|outer| Polygon {
            outer,
            holes: Vec::new(),
        })
        .collect();
    for hole in holes {
        let probe = hole[0];
        let target = polygons
            .iter()
            .enumerate()
            .filter(|(_, p)| ring_contains(&p.outer, probe))
            .min_by(|a, b| signed_area(&a.1.outer).total_cmp(&signed_area(&b.1.outer)))
            .map(|(i, _)| i);
        if let Some(i) = target {
            polygons[i].holes.push(hole);
        }
    }
    polygons
}

/// Removes collinear vertices.
fn simplify_ring(ring: Vec<Point>) -> Vec<Point> {
    let n = ring.len();
    if n < 4 {
        return ring;
    }
    let scale = ring.iter().flat_map(|p| [p[0].abs(), p[1].abs()]).fold(1.0, f64::max);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
        let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        let len = (dist2(a, b) * dist2(b, c)).sqrt();
        if cross.abs() > 1e-12 * len.max(1e-300) || len < 1e-30 * scale {
            out.push(b);
        }
    }
    out
}

pub fn signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Even-odd point-in-ring test; points on the boundary count as inside.
pub fn ring_contains(ring: &[Point], p: Point) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if on_segment(a, b, p) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let len2 = dist2(a, b);
    let scale = len2.sqrt().max(1e-12);
    if cross.abs() / scale > 1e-9 {
        return false;
    }
    let dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
    dot >= -1e-12 && dot <= len2 + 1e-12
}

pub fn polygon_contains(poly: &Polygon, p: Point) -> bool {
    ring_contains(&poly.outer, p)
        && poly
            .holes
            .iter()
            .all(|h| !ring_contains(h, p) || h.iter().enumerate().any(|(i, &a)| on_segment(a, h[(i + 1) % h.len()], p)))
}
