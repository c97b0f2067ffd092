//! Polygonal meshes for the two contacting bodies.
//!
//! A [`PolyMesh`] stores vertex coordinates and counter-clockwise vertex loops.
//! The edge table (with cell adjacency and boundary labels) is derived and kept
//! in sync by every mutating operation. A straight side of a polygon may be made
//! of several collinear edges; this is how hanging nodes created by contact node
//! insertion are represented.

mod generators;
mod io;
mod perturb;
mod quality;
mod voronoi;

pub use generators::{build_half_disk_mesh, build_hexagonal_mesh, build_square_mesh, build_web_mesh, Rect};
pub(crate) use generators::{build_hexagonal_mesh_body, build_square_mesh_body, build_web_mesh_body};
pub use io::{read_mesh, write_mesh};
pub use perturb::perturb_contact_band;
pub use quality::{quality_report, quality_report_pair, CellQuality, MeshQualityReport};
pub use voronoi::clipped_voronoi;

use std::collections::HashMap;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};

pub type Point = Point2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryLabel {
    Dirichlet,
    Neumann,
    Contact,
}

impl BoundaryLabel {
    pub fn code(self) -> char {
        match self {
            BoundaryLabel::Dirichlet => 'D',
            BoundaryLabel::Neumann => 'N',
            BoundaryLabel::Contact => 'C',
        }
    }

    pub fn from_code(c: &str) -> Option<Self> {
        match c {
            "D" => Some(BoundaryLabel::Dirichlet),
            "N" => Some(BoundaryLabel::Neumann),
            "C" => Some(BoundaryLabel::Contact),
            _ => None,
        }
    }
}

/// One mesh edge. `vertices` is stored with the smaller index first.
#[derive(Clone, Debug)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// `(cell, local edge index)` pairs; one entry on the boundary, two inside.
    pub cells: Vec<(usize, usize)>,
    pub label: Option<BoundaryLabel>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells.len() == 1
    }
}

/// Geometric data of a single polygon.
#[derive(Clone, Debug)]
pub struct CellGeometry {
    pub vertices: Vec<Point>,
    pub area: f64,
    pub centroid: Point,
    pub diameter: f64,
    pub perimeter: f64,
}

impl CellGeometry {
    pub fn from_vertices(vertices: Vec<Point>) -> Self {
        let area = signed_area(&vertices);
        let centroid = polygon_centroid(&vertices, area);
        let mut diameter = 0.0_f64;
        for (i, a) in vertices.iter().enumerate() {
            for b in &vertices[i + 1..] {
                diameter = diameter.max((b - a).norm());
            }
        }
        let n = vertices.len();
        let perimeter = (0..n).map(|i| (vertices[(i + 1) % n] - vertices[i]).norm()).sum();
        CellGeometry {
            vertices,
            area,
            centroid,
            diameter,
            perimeter,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub fn edge(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        (b - a).norm()
    }

    /// Unit outward normal of edge `i` (loops are counter-clockwise).
    pub fn outward_normal(&self, i: usize) -> Vector2<f64> {
        let (a, b) = self.edge(i);
        let t = (b - a).normalize();
        Vector2::new(t.y, -t.x)
    }

    pub fn min_edge_length(&self) -> f64 {
        (0..self.n_vertices())
            .map(|i| self.edge_length(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when every fan triangle (centroid, v_i, v_{i+1}) is positively oriented.
    pub fn centroid_sees_all_edges(&self) -> bool {
        let tol = 1e-14 * self.diameter * self.diameter;
        (0..self.n_vertices()).all(|i| {
            let (a, b) = self.edge(i);
            triangle_signed_area(&self.centroid, &a, &b) > tol
        })
    }
}

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

pub fn triangle_signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn polygon_centroid(poly: &[Point], area: f64) -> Point {
    let n = poly.len();
    // shift to the first vertex for round-off
    let o = poly[0];
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let a = poly[i] - o;
        let b = poly[(i + 1) % n] - o;
        let cross = a.x * b.y - b.x * a.y;
        cx += (a.x + b.x) * cross;
        cy += (a.y + b.y) * cross;
    }
    Point::new(o.x + cx / (6.0 * area), o.y + cy / (6.0 * area))
}

fn segments_intersect(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    let d1 = triangle_signed_area(q1, q2, p1);
    let d2 = triangle_signed_area(q1, q2, p2);
    let d3 = triangle_signed_area(p1, p2, q1);
    let d4 = triangle_signed_area(p1, p2, q2);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Checks that a vertex loop is a simple, counter-clockwise polygon.
pub fn validate_polygon(poly: &[Point]) -> std::result::Result<(), String> {
    let n = poly.len();
    if n < 3 {
        return Err(format!("polygon with {n} vertices"));
    }
    let geom = CellGeometry::from_vertices(poly.to_vec());
    if !(geom.area > 1e-14 * geom.diameter * geom.diameter) {
        return Err(format!("non-positive or degenerate area {:e}", geom.area));
    }
    for i in 0..n {
        if (poly[(i + 1) % n] - poly[i]).norm() <= 1e-14 * geom.diameter {
            return Err(format!("zero-length edge at local vertex {i}"));
        }
    }
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_intersect(&poly[i], &poly[(i + 1) % n], &poly[j], &poly[(j + 1) % n]) {
                return Err(format!("self-intersecting edges {i} and {j}"));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PolyMesh {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    cell_edges: Vec<Vec<usize>>,
    edge_lookup: HashMap<(usize, usize), usize>,
    body_id: u8,
}

impl PolyMesh {
    /// Builds a mesh and its edge table, validating every invariant except the
    /// presence of boundary labels (see [`PolyMesh::check_labels`]).
    pub fn new(vertices: Vec<Point>, cells: Vec<Vec<usize>>, body_id: u8) -> Result<Self> {
        if body_id != 1 && body_id != 2 {
            return Err(VemError::InvalidArgument(format!("body id {body_id} is not 1 or 2")));
        }
        let mut mesh = PolyMesh {
            vertices,
            cells,
            edges: Vec::new(),
            cell_edges: Vec::new(),
            edge_lookup: HashMap::new(),
            body_id,
        };
        mesh.rebuild(&HashMap::new())?;
        Ok(mesh)
    }

    fn rebuild(&mut self, labels: &HashMap<(usize, usize), BoundaryLabel>) -> Result<()> {
        for (c, cell) in self.cells.iter().enumerate() {
            if let Some(&v) = cell.iter().find(|&&v| v >= self.vertices.len()) {
                return Err(VemError::InvalidMesh(format!("cell {c} references vertex {v}")));
            }
            let poly: Vec<Point> = cell.iter().map(|&v| self.vertices[v]).collect();
            validate_polygon(&poly).map_err(|e| VemError::InvalidMesh(format!("cell {c}: {e}")))?;
        }
        let mut edges: Vec<Edge> = Vec::new();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_edges = Vec::with_capacity(self.cells.len());
        for (c, cell) in self.cells.iter().enumerate() {
            let n = cell.len();
            let mut ids = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (cell[i], cell[(i + 1) % n]);
                let key = (a.min(b), a.max(b));
                let id = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        cells: Vec::new(),
                        label: None,
                    });
                    edges.len() - 1
                });
                edges[id].cells.push((c, i));
                ids.push(id);
            }
            cell_edges.push(ids);
        }
        for (id, e) in edges.iter_mut().enumerate() {
            match e.cells.len() {
                1 => e.label = labels.get(&(e.vertices[0], e.vertices[1])).copied(),
                2 => {
                    let (c0, i0) = e.cells[0];
                    let (c1, i1) = e.cells[1];
                    let start0 = self.cells[c0][i0];
                    let start1 = self.cells[c1][i1];
                    if start0 == start1 {
                        return Err(VemError::InvalidMesh(format!(
                            "edge {id} traversed in the same direction by cells {c0} and {c1}"
                        )));
                    }
                }
                k => {
                    return Err(VemError::InvalidMesh(format!("edge {id} shared by {k} cells")));
                }
            }
        }
        self.edges = edges;
        self.edge_lookup = lookup;
        self.cell_edges = cell_edges;
        Ok(())
    }

    fn current_labels(&self) -> HashMap<(usize, usize), BoundaryLabel> {
        self.edges
            .iter()
            .filter_map(|e| e.label.map(|l| ((e.vertices[0], e.vertices[1]), l)))
            .collect()
    }

    pub fn body_id(&self) -> u8 {
        self.body_id
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id]
    }

    /// Global edge ids of the local edges of `cell`.
    pub fn cell_edges(&self, cell: usize) -> &[usize] {
        &self.cell_edges[cell]
    }

    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn cell_geometry(&self, cell: usize) -> CellGeometry {
        CellGeometry::from_vertices(self.cells[cell].iter().map(|&v| self.vertices[v]).collect())
    }

    pub fn edge_midpoint(&self, id: usize) -> Point {
        let [a, b] = self.edges[id].vertices;
        nalgebra::center(&self.vertices[a], &self.vertices[b])
    }

    pub fn edge_length(&self, id: usize) -> f64 {
        let [a, b] = self.edges[id].vertices;
        (self.vertices[b] - self.vertices[a]).norm()
    }

    /// Normal of the edge rotated clockwise from the direction low → high vertex index.
    pub fn edge_global_normal(&self, id: usize) -> Vector2<f64> {
        let [a, b] = self.edges[id].vertices;
        let t = (self.vertices[b] - self.vertices[a]).normalize();
        Vector2::new(t.y, -t.x)
    }

    /// Outward normal of a boundary edge.
    pub fn boundary_outward_normal(&self, id: usize) -> Vector2<f64> {
        let (c, i) = self.edges[id].cells[0];
        let cell = &self.cells[c];
        let a = self.vertices[cell[i]];
        let b = self.vertices[cell[(i + 1) % cell.len()]];
        let t = (b - a).normalize();
        Vector2::new(t.y, -t.x)
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary()).map(|(i, _)| i)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_geometry(c).area).sum()
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| self.cell_geometry(c).diameter)
            .fold(0.0, f64::max)
    }

    pub fn set_label(&mut self, edge: usize, label: BoundaryLabel) -> Result<()> {
        if !self.edges[edge].is_boundary() {
            return Err(VemError::InvalidArgument(format!("edge {edge} is not a boundary edge")));
        }
        self.edges[edge].label = Some(label);
        Ok(())
    }

    /// Labels every boundary edge with `classify(midpoint, outward normal)`; edges
    /// for which the closure returns `None` keep their previous label.
    pub fn label_boundary<F>(&mut self, classify: F)
    where
        F: Fn(&Point, &Vector2<f64>) -> Option<BoundaryLabel>,
    {
        let ids: Vec<usize> = self.boundary_edges().collect();
        for id in ids {
            let m = self.edge_midpoint(id);
            let n = self.boundary_outward_normal(id);
            if let Some(l) = classify(&m, &n) {
                self.edges[id].label = Some(l);
            }
        }
    }

    /// Every boundary edge must carry exactly one label.
    pub fn check_labels(&self) -> Result<()> {
        if let Some(id) = self.boundary_edges().find(|&id| self.edges[id].label.is_none()) {
            return Err(VemError::InvalidMesh(format!(
                "boundary edge {id} ({:?}) has no label",
                self.edges[id].vertices
            )));
        }
        Ok(())
    }

    pub fn edges_with_label(&self, label: BoundaryLabel) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == Some(label))
            .map(|(i, _)| i)
            .collect()
    }

    /// Applies an affine point map; `reverse` flips every loop (use it for reflections).
    pub fn transformed<F: Fn(&Point) -> Point>(&self, map: F, reverse: bool, body_id: u8) -> Result<Self> {
        let vertices: Vec<Point> = self.vertices.iter().map(&map).collect();
        let cells: Vec<Vec<usize>> = self
            .cells
            .iter()
            .map(|c| {
                let mut c = c.clone();
                if reverse {
                    c.reverse();
                }
                c
            })
            .collect();
        let labels = self.current_labels();
        let mut out = PolyMesh {
            vertices,
            cells,
            edges: Vec::new(),
            cell_edges: Vec::new(),
            edge_lookup: HashMap::new(),
            body_id,
        };
        out.rebuild(&labels)?;
        Ok(out)
    }

    /// Mirror image across the horizontal line `y = axis`.
    pub fn mirrored_y(&self, axis: f64, body_id: u8) -> Result<Self> {
        self.transformed(|p| Point::new(p.x, 2.0 * axis - p.y), true, body_id)
    }

    /// Splits boundary edges at the given points. Each entry lists the points,
    /// which must lie on the segment; they are inserted in order along the edge.
    /// Split edges inherit the label of their parent. Returns, per request, the
    /// new vertex ids in the same order as the given points.
    pub fn split_boundary_edges(&mut self, splits: &[(usize, Vec<Point>)]) -> Result<Vec<Vec<usize>>> {
        let mut labels = self.current_labels();
        let mut created = Vec::with_capacity(splits.len());
        // (cell, local edge) -> ordered new vertex ids
        let mut per_cell: HashMap<usize, Vec<(usize, Vec<usize>)>> = HashMap::new();
        for (edge_id, points) in splits {
            let edge = self.edges[*edge_id].clone();
            if !edge.is_boundary() {
                return Err(VemError::InvalidArgument(format!("edge {edge_id} is interior")));
            }
            let (c, i) = edge.cells[0];
            let cell = &self.cells[c];
            let start = cell[i];
            let end = cell[(i + 1) % cell.len()];
            let a = self.vertices[start];
            let b = self.vertices[end];
            let len2 = (b - a).norm_squared();
            let mut params: Vec<(f64, usize)> = Vec::new();
            let mut ids = Vec::with_capacity(points.len());
            for p in points {
                let t = (p - a).dot(&(b - a)) / len2;
                if !(t > 0.0 && t < 1.0) {
                    return Err(VemError::InvalidArgument(format!(
                        "split point ({}, {}) not inside edge {edge_id}",
                        p.x, p.y
                    )));
                }
                let id = self.vertices.len();
                self.vertices.push(*p);
                params.push((t, id));
                ids.push(id);
            }
            params.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            let ordered: Vec<usize> = params.iter().map(|&(_, id)| id).collect();
            if let Some(label) = labels.remove(&(edge.vertices[0], edge.vertices[1])) {
                let mut chain = vec![start];
                chain.extend(&ordered);
                chain.push(end);
                for w in chain.windows(2) {
                    labels.insert((w[0].min(w[1]), w[0].max(w[1])), label);
                }
            }
            per_cell.entry(c).or_default().push((i, ordered));
            created.push(ids);
        }
        for (c, mut inserts) in per_cell {
            // insert from the last local edge backwards so indices stay valid
            inserts.sort_by(|x, y| y.0.cmp(&x.0));
            for (i, ids) in inserts {
                let pos = i + 1;
                for (k, id) in ids.into_iter().enumerate() {
                    self.cells[c].insert(pos + k, id);
                }
            }
        }
        self.rebuild(&labels)?;
        Ok(created)
    }

    /// Moves a vertex and re-validates the mesh; on failure the mesh is restored.
    pub fn move_vertex(&mut self, v: usize, to: Point) -> Result<()> {
        let old = self.vertices[v];
        self.vertices[v] = to;
        let labels = self.current_labels();
        if let Err(e) = self.rebuild(&labels) {
            self.vertices[v] = old;
            self.rebuild(&labels)?;
            return Err(e);
        }
        Ok(())
    }

    /// Cells that contain vertex `v`.
    pub fn cells_of_vertex(&self, v: usize) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.contains(&v))
            .map(|(i, _)| i)
            .collect()
    }
}
