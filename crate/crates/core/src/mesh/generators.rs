use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::voronoi::{clipped_voronoi, voronoi_cells};
use super::{Point, PolyMesh};
use crate::error::{Result, VemError};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.x0, self.y0),
            Point::new(self.x1, self.y0),
            Point::new(self.x1, self.y1),
            Point::new(self.x0, self.y1),
        ]
    }

    fn validate(&self) -> Result<()> {
        if !(self.width() > 0.0 && self.height() > 0.0) || !self.area().is_finite() {
            return Err(VemError::InvalidArgument(format!("degenerate rectangle {self:?}")));
        }
        Ok(())
    }

    pub(crate) fn snap(&self, p: &Point, tol: f64) -> Point {
        let snap1 = |v: f64, a: f64, b: f64| {
            if (v - a).abs() <= tol {
                a
            } else if (v - b).abs() <= tol {
                b
            } else {
                v
            }
        };
        Point::new(snap1(p.x, self.x0, self.x1), snap1(p.y, self.y0, self.y1))
    }

    pub(crate) fn on_boundary(&self, p: &Point, tol: f64) -> bool {
        (p.x - self.x0).abs() <= tol
            || (p.x - self.x1).abs() <= tol
            || (p.y - self.y0).abs() <= tol
            || (p.y - self.y1).abs() <= tol
    }
}

pub fn build_square_mesh(rect: &Rect, n: usize) -> Result<PolyMesh> {
    build_square_mesh_body(rect, n, 1)
}

pub(crate) fn build_square_mesh_body(rect: &Rect, n: usize, body_id: u8) -> Result<PolyMesh> {
    if n == 0 {
        return Err(VemError::InvalidArgument("square mesh needs n >= 1".into()));
    }
    rect.validate()?;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        let y = if j == n { rect.y1 } else { rect.y0 + rect.height() * j as f64 / n as f64 };
        for i in 0..=n {
            let x = if i == n { rect.x1 } else { rect.x0 + rect.width() * i as f64 / n as f64 };
            vertices.push(Point::new(x, y));
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolyMesh::new(vertices, cells, body_id)
}

fn perfect_square_root(count: usize) -> Option<usize> {
    let r = (count as f64).sqrt().round() as usize;
    (r >= 2 && r * r == count).then_some(r)
}

/// Clipped Voronoi diagram of a row-staggered lattice: hexagons inside,
/// pentagons and quadrilaterals along the boundary.
pub fn build_hexagonal_mesh(rect: &Rect, target_count: usize) -> Result<PolyMesh> {
    build_hexagonal_mesh_body(rect, target_count, 1)
}

pub(crate) fn build_hexagonal_mesh_body(rect: &Rect, target_count: usize, body_id: u8) -> Result<PolyMesh> {
    rect.validate()?;
    let n = perfect_square_root(target_count).ok_or_else(|| {
        VemError::InvalidArgument(format!(
            "hexagonal mesh supports cell counts n*n with n >= 2, got {target_count}"
        ))
    })?;
    let mut seeds = Vec::with_capacity(n * n);
    for j in 0..n {
        let shift = if j % 2 == 0 { -0.25 } else { 0.25 };
        for i in 0..n {
            let x = rect.x0 + rect.width() * (i as f64 + 0.5 + shift) / n as f64;
            let y = rect.y0 + rect.height() * (j as f64 + 0.5) / n as f64;
            seeds.push(Point::new(x, y));
        }
    }
    clipped_voronoi(&seeds, rect, body_id)
}

const LLOYD_SWEEPS: usize = 3;
const WEB_RETRIES: usize = 8;
/// Web-mesh edges shorter than this fraction of the smaller adjacent cell
/// diameter are collapsed.
const SHORT_EDGE_FRACTION: f64 = 0.1;

/// Voronoi mesh of `target_count` uniformly random seeds after Lloyd relaxation.
pub fn build_web_mesh(rect: &Rect, target_count: usize, seed: u64) -> Result<PolyMesh> {
    build_web_mesh_body(rect, target_count, seed, 1)
}

pub(crate) fn build_web_mesh_body(rect: &Rect, target_count: usize, seed: u64, body_id: u8) -> Result<PolyMesh> {
    rect.validate()?;
    if target_count < 2 {
        return Err(VemError::InvalidArgument(format!(
            "web mesh needs at least 2 cells, got {target_count}"
        )));
    }
    let mut last_err = None;
    for attempt in 0..WEB_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let mut seeds: Vec<Point> = (0..target_count)
            .map(|_| {
                Point::new(
                    rect.x0 + rect.width() * rng.gen::<f64>(),
                    rect.y0 + rect.height() * rng.gen::<f64>(),
                )
            })
            .collect();
        for _ in 0..LLOYD_SWEEPS {
            let cells = voronoi_cells(&seeds, rect);
            for (s, poly) in seeds.iter_mut().zip(&cells) {
                if poly.len() >= 3 {
                    *s = super::CellGeometry::from_vertices(poly.clone()).centroid;
                }
            }
        }
        match clipped_voronoi(&seeds, rect, body_id).and_then(|m| collapse_short_edges(&m, rect, SHORT_EDGE_FRACTION)) {
            Ok(m) => return Ok(m),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

fn is_strictly_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    let d = super::CellGeometry::from_vertices(poly.to_vec()).diameter;
    n >= 3 && (0..n).all(|i| super::triangle_signed_area(&poly[i], &poly[(i + 1) % n], &poly[(i + 2) % n]) > 1e-10 * d * d)
}

/// Merges the endpoints of short edges one at a time, shortest first, keeping
/// rectangle corners and boundary vertices in place. A collapse that would leave
/// a cell with fewer than three vertices or a non-convex cell is skipped.
fn collapse_short_edges(mesh: &PolyMesh, rect: &Rect, fraction: f64) -> Result<PolyMesh> {
    let tol = 1e-12 * rect.width().max(rect.height());
    let corner = |p: &Point| rect.corners().iter().any(|c| (c - p).norm() <= tol);
    let side = |p: &Point| -> u8 {
        ((p.x - rect.x0).abs() <= tol) as u8
            | (((p.x - rect.x1).abs() <= tol) as u8) << 1
            | (((p.y - rect.y0).abs() <= tol) as u8) << 2
            | (((p.y - rect.y1).abs() <= tol) as u8) << 3
    };
    let mut vertices = mesh.vertices().to_vec();
    let mut cells = mesh.cells().to_vec();
    'pass: loop {
        let current = PolyMesh::new(vertices.clone(), cells.clone(), mesh.body_id())?;
        let diam: Vec<f64> = (0..current.n_cells()).map(|c| current.cell_geometry(c).diameter).collect();
        let mut short: Vec<(f64, usize)> = (0..current.n_edges())
            .filter_map(|id| {
                let e = current.edge(id);
                let d = e.cells.iter().map(|&(c, _)| diam[c]).fold(f64::INFINITY, f64::min);
                let len = current.edge_length(id);
                (len < fraction * d).then_some((len, id))
            })
            .collect();
        short.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (_, id) in short {
            let [a, b] = current.edge(id).vertices;
            let (pa, pb) = (vertices[a], vertices[b]);
            let (sa, sb) = (side(&pa), side(&pb));
            let target = match (corner(&pa), corner(&pb)) {
                (true, true) => continue,
                (true, false) => pa,
                (false, true) => pb,
                _ if sa != 0 && sb != 0 => {
                    if sa & sb == 0 {
                        continue;
                    }
                    Point::from((pa.coords + pb.coords) * 0.5)
                }
                _ if sa != 0 => pa,
                _ if sb != 0 => pb,
                _ => Point::from((pa.coords + pb.coords) * 0.5),
            };
            let mut trial = cells.clone();
            let mut ok = true;
            for cell in trial.iter_mut() {
                if !cell.contains(&a) && !cell.contains(&b) {
                    continue;
                }
                for v in cell.iter_mut() {
                    if *v == b {
                        *v = a;
                    }
                }
                cell.dedup();
                if cell.len() > 1 && cell.first() == cell.last() {
                    cell.pop();
                }
                let poly: Vec<Point> = cell.iter().map(|&v| if v == a { target } else { vertices[v] }).collect();
                if !is_strictly_convex(&poly) {
                    ok = false;
                    break;
                }
            }
            if ok {
                vertices[a] = target;
                cells = trial;
                continue 'pass;
            }
        }
        break;
    }
    // drop the merged-away vertices
    let mut used = vec![false; vertices.len()];
    for cell in &cells {
        for &v in cell {
            used[v] = true;
        }
    }
    let mut index = vec![usize::MAX; vertices.len()];
    let mut kept = Vec::new();
    for (v, p) in vertices.iter().enumerate() {
        if used[v] {
            index[v] = kept.len();
            kept.push(*p);
        }
    }
    let cells = cells.into_iter().map(|c| c.into_iter().map(|v| index[v]).collect()).collect();
    PolyMesh::new(kept, cells, mesh.body_id())
}

/// Lower half-disk of radius `r` centred at `center` (flat side on top), meshed by
/// quadrilaterals: an `n × n/2` core rectangle `[-r/2, r/2] × [-r/2, 0]` (relative to
/// the centre) surrounded by a ring of `2n × m` cells whose outer nodes lie on the
/// arc at angles `π + jπ/(2n)`.
pub fn build_half_disk_mesh(center: Point, r: f64, n: usize, m: usize, body_id: u8) -> Result<PolyMesh> {
    if n < 2 || n % 2 != 0 || m == 0 {
        return Err(VemError::InvalidArgument(format!(
            "half-disk mesh needs even n >= 2 and m >= 1, got n={n}, m={m}"
        )));
    }
    if !(r > 0.0) {
        return Err(VemError::InvalidArgument(format!("radius {r} must be positive")));
    }
    let a = 0.5 * r;
    let nh = n / 2;
    let mut vertices = Vec::new();
    // core grid, (n+1) × (nh+1) nodes, row 0 at the bottom
    let core = |i: usize, j: usize| j * (n + 1) + i;
    for j in 0..=nh {
        for i in 0..=n {
            let x = -a + 2.0 * a * i as f64 / n as f64;
            let y = -a + a * j as f64 / nh as f64;
            vertices.push(Point::new(center.x + x, center.y + y));
        }
    }
    let mut cells = Vec::new();
    for j in 0..nh {
        for i in 0..n {
            cells.push(vec![core(i, j), core(i + 1, j), core(i + 1, j + 1), core(i, j + 1)]);
        }
    }
    // core boundary path from the top-left corner, down, across, up: 2n segments
    let mut inner: Vec<usize> = Vec::with_capacity(2 * n + 1);
    for j in (0..=nh).rev() {
        inner.push(core(0, j));
    }
    for i in 1..=n {
        inner.push(core(i, 0));
    }
    for j in 1..=nh {
        inner.push(core(n, j));
    }
    // ring layers; layer 0 is the core boundary, layer m is the arc
    let mut layers = vec![inner.clone()];
    for l in 1..=m {
        let s = l as f64 / m as f64;
        let mut ids = Vec::with_capacity(2 * n + 1);
        for (j, &vi) in inner.iter().enumerate() {
            let phi = std::f64::consts::PI * (1.0 + j as f64 / (2 * n) as f64);
            let arc = Point::new(center.x + r * phi.cos(), center.y + r * phi.sin());
            let arc = if j == 0 || j == 2 * n { Point::new(arc.x, center.y) } else { arc };
            let p = vertices[vi] + (arc - vertices[vi]) * s;
            ids.push(vertices.len());
            vertices.push(p);
        }
        layers.push(ids);
    }
    for l in 0..m {
        let (lo, hi) = (&layers[l], &layers[l + 1]);
        for j in 0..2 * n {
            // inner path runs clockwise around the core, so walk outward first
            cells.push(vec![lo[j], hi[j], hi[j + 1], lo[j + 1]]);
        }
    }
    PolyMesh::new(vertices, cells, body_id)
}
