use std::collections::HashMap;

use super::{signed_area, Point, PolyMesh, Rect};
use crate::error::{Result, VemError};

/// Sutherland–Hodgman clip of a convex polygon against `{x : (x - m)·d <= 0}`.
fn clip_half_plane(poly: &[Point], m: &Point, d: &nalgebra::Vector2<f64>) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let fa = (a - m).dot(d);
        let fb = (b - m).dot(d);
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Voronoi cell of every seed, clipped to `rect`. Cells are convex and counter-clockwise.
pub(crate) fn voronoi_cells(seeds: &[Point], rect: &Rect) -> Vec<Vec<Point>> {
    let mut cells = Vec::with_capacity(seeds.len());
    for (i, p) in seeds.iter().enumerate() {
        let mut others: Vec<(f64, usize)> = seeds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, q)| ((q - p).norm(), j))
            .collect();
        others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut poly = rect.corners().to_vec();
        for (dist, j) in others {
            let radius = poly.iter().map(|v| (v - p).norm()).fold(0.0, f64::max);
            if dist > 2.0 * radius {
                break;
            }
            let q = seeds[j];
            let m = nalgebra::center(p, &q);
            poly = clip_half_plane(&poly, &m, &(q - p));
            if poly.len() < 3 {
                break;
            }
        }
        cells.push(poly);
    }
    cells
}

/// Merges nearby points into shared vertex ids using a bucket grid.
struct VertexPool {
    tol: f64,
    points: Vec<Point>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl VertexPool {
    fn new(tol: f64) -> Self {
        VertexPool {
            tol,
            points: Vec::new(),
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: &Point) -> (i64, i64) {
        ((p.x / self.tol).floor() as i64, (p.y / self.tol).floor() as i64)
    }

    fn insert(&mut self, p: Point) -> usize {
        let (kx, ky) = self.key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        if (self.points[id] - p).norm() <= self.tol {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.buckets.entry((kx, ky)).or_default().push(id);
        id
    }
}

/// Turns a list of polygons into a conforming indexed mesh, snapping points that
/// lie on the rectangle boundary exactly onto it.
pub(crate) fn polygons_to_mesh(polys: &[Vec<Point>], rect: &Rect, body_id: u8) -> Result<PolyMesh> {
    let scale = rect.width().max(rect.height());
    let tol = 1e-9 * scale;
    let mut pool = VertexPool::new(tol);
    let mut cells = Vec::with_capacity(polys.len());
    for (c, poly) in polys.iter().enumerate() {
        let mut loop_ids: Vec<usize> = Vec::with_capacity(poly.len());
        for p in poly {
            let id = pool.insert(rect.snap(p, tol));
            if loop_ids.last() != Some(&id) {
                loop_ids.push(id);
            }
        }
        while loop_ids.len() > 1 && loop_ids.first() == loop_ids.last() {
            loop_ids.pop();
        }
        if loop_ids.len() < 3 {
            return Err(VemError::InvalidMesh(format!("Voronoi cell {c} collapsed")));
        }
        cells.push(loop_ids);
    }
    let mesh = PolyMesh::new(pool.points, cells, body_id)?;
    // an interior edge seen by only one cell means a T-junction
    for id in mesh.boundary_edges() {
        let m = mesh.edge_midpoint(id);
        if !rect.on_boundary(&m, tol) {
            return Err(VemError::InvalidMesh(format!("non-conforming interior edge {id}")));
        }
    }
    Ok(mesh)
}

/// Clipped Voronoi mesh of the given seeds.
pub fn clipped_voronoi(seeds: &[Point], rect: &Rect, body_id: u8) -> Result<PolyMesh> {
    let polys = voronoi_cells(seeds, rect);
    for (i, p) in polys.iter().enumerate() {
        if p.len() < 3 || signed_area(p) <= 1e-14 * rect.area() {
            return Err(VemError::InvalidMesh(format!("degenerate Voronoi cell for seed {i}")));
        }
    }
    polygons_to_mesh(&polys, rect, body_id)
}
