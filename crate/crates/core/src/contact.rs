//! Contact interface: trace extraction, node insertion, pairing and the initial gap.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::mesh::{BoundaryLabel, Point, PolyMesh};
use crate::quadrature::edge_rule;

/// The straight contact line `Γ_C = {origin + s·tangent}`, with `normal` the unit
/// outward normal of the slave body.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactLine {
    pub origin: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
}

impl ContactLine {
    pub fn new(origin: Point, tangent: Vector2<f64>, normal: Vector2<f64>) -> Result<Self> {
        let t = tangent.normalize();
        let n = normal.normalize();
        if !t.iter().chain(n.iter()).all(|c| c.is_finite()) || t.dot(&n).abs() > 1e-12 {
            return Err(VemError::InvalidArgument("contact normal must be orthogonal to the tangent".into()));
        }
        Ok(ContactLine {
            origin: [origin.x, origin.y],
            tangent: [t.x, t.y],
            normal: [n.x, n.y],
        })
    }

    pub fn origin(&self) -> Point {
        Point::new(self.origin[0], self.origin[1])
    }

    pub fn tangent(&self) -> Vector2<f64> {
        Vector2::new(self.tangent[0], self.tangent[1])
    }

    /// Unit outward normal `n¹` of the slave body.
    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(self.normal[0], self.normal[1])
    }

    pub fn abscissa(&self, x: &Point) -> f64 {
        (x - self.origin()).dot(&self.tangent())
    }

    pub fn offset(&self, x: &Point) -> f64 {
        (x - self.origin()).dot(&self.normal())
    }

    pub fn point_at(&self, s: f64) -> Point {
        self.origin() + self.tangent() * s
    }
}

/// How a body's contact boundary relates to the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceMode {
    /// Contact edges lie on the line.
    OnLine,
    /// Contact edges are paired with the line by orthogonal projection.
    Projected,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceNode {
    pub vertex: usize,
    pub s: f64,
}

fn span_scale(mesh: &PolyMesh) -> f64 {
    mesh.vertices().iter().map(|p| p.coords.norm()).fold(0.0, f64::max).max(mesh.max_diameter())
}

/// Ordered contact nodes of a mesh, sorted by abscissa along the line.
pub fn extract_trace(mesh: &PolyMesh, line: &ContactLine, mode: TraceMode) -> Result<Vec<TraceNode>> {
    let edges = mesh.edges_with_label(BoundaryLabel::Contact);
    if edges.is_empty() {
        return Err(VemError::InvalidMesh(format!("body {} has no contact edges", mesh.body_id())));
    }
    let nv = mesh.n_vertices();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for &e in &edges {
        let [a, b] = mesh.edge(e).vertices;
        adj[a].push(b);
        adj[b].push(a);
    }
    if adj.iter().any(|n| n.len() > 2) {
        return Err(VemError::InvalidMesh("contact edges branch".into()));
    }
    let ends: Vec<usize> = (0..nv).filter(|&v| adj[v].len() == 1).collect();
    if ends.len() != 2 {
        return Err(VemError::InvalidMesh("contact edges do not form a single open polyline".into()));
    }
    let mut chain = vec![ends[0]];
    let mut prev = usize::MAX;
    let mut cur = ends[0];
    loop {
        let next = adj[cur].iter().copied().find(|&n| n != prev);
        match next {
            Some(n) => {
                prev = cur;
                cur = n;
                chain.push(n);
                if adj[n].len() == 1 {
                    break;
                }
            }
            None => break,
        }
    }
    if chain.len() != edges.len() + 1 {
        return Err(VemError::InvalidMesh("contact edges are disconnected".into()));
    }
    let tol = 1e-12 * span_scale(mesh);
    let mut nodes: Vec<TraceNode> = chain
        .iter()
        .map(|&v| TraceNode {
            vertex: v,
            s: line.abscissa(&mesh.vertex(v)),
        })
        .collect();
    if mode == TraceMode::OnLine {
        if let Some(&v) = chain.iter().find(|&&v| line.offset(&mesh.vertex(v)).abs() > tol) {
            return Err(VemError::InvalidMesh(format!("contact vertex {v} is off the contact line")));
        }
    }
    if nodes.first().unwrap().s > nodes.last().unwrap().s {
        nodes.reverse();
    }
    if nodes.windows(2).any(|w| !(w[1].s > w[0].s + tol)) {
        return Err(VemError::InvalidMesh("contact polyline is not monotone along the line".into()));
    }
    Ok(nodes)
}

/// Initial normal gap along the contact line, as a function of the abscissa.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GapFunction {
    Zero,
    /// `R - sqrt(R² - (s - s_0)²)`.
    Circular { radius: f64, touch: f64 },
    /// Piecewise linear through `(s_i, g_i)`, constant beyond the ends.
    Tabulated { s: Vec<f64>, g: Vec<f64> },
}

impl GapFunction {
    pub fn tabulated(s: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        if s.len() != g.len() || s.is_empty() || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(VemError::InvalidArgument("tabulated gap needs increasing abscissae".into()));
        }
        if g.iter().any(|&v| !(v >= 0.0)) {
            return Err(VemError::InvalidArgument("initial gap must be non-negative".into()));
        }
        Ok(GapFunction::Tabulated { s, g })
    }

    pub fn at(&self, s: f64) -> Result<f64> {
        match self {
            GapFunction::Zero => Ok(0.0),
            GapFunction::Circular { radius, touch } => {
                let d = s - touch;
                if d.abs() > *radius {
                    return Err(VemError::Domain(format!("|s| = {} exceeds radius {radius}", d.abs())));
                }
                // R - sqrt(R² - d²) without cancellation
                Ok(d * d / (radius + (radius * radius - d * d).sqrt()))
            }
            GapFunction::Tabulated { s: xs, g } => {
                if s <= xs[0] {
                    return Ok(g[0]);
                }
                if s >= *xs.last().unwrap() {
                    return Ok(*g.last().unwrap());
                }
                let i = xs.partition_point(|&x| x <= s) - 1;
                let t = (s - xs[i]) / (xs[i + 1] - xs[i]);
                Ok(g[i] + t * (g[i + 1] - g[i]))
            }
        }
    }

    /// Mean value over `[s0, s1]` from a degree-5 Gauss rule.
    pub fn mean(&self, s0: f64, s1: f64) -> Result<f64> {
        let rule = edge_rule(5);
        let mut m = 0.0;
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            m += w * self.at(s0 + (s1 - s0) * t)?;
        }
        Ok(m)
    }
}

/// `g0` at a point of the contact line.
pub fn evaluate_gap(g: &GapFunction, line: &ContactLine, x: &Point) -> Result<f64> {
    let scale = x.coords.norm().max(1.0);
    if line.offset(x).abs() > 1e-12 * scale {
        return Err(VemError::Domain(format!("point ({}, {}) is not on the contact line", x.x, x.y)));
    }
    g.at(line.abscissa(x))
}

/// Common decomposition of `Γ_C` after node insertion.
#[derive(Clone, Debug)]
pub struct ContactTrace {
    pub line: ContactLine,
    /// Abscissae of the nodes `x_l`, strictly increasing.
    pub abscissae: Vec<f64>,
    /// Nodes on the contact line.
    pub nodes: Vec<Point>,
    pub slave_vertices: Vec<usize>,
    pub master_vertices: Vec<usize>,
    /// Mesh edge `(x_l, x_{l+1})` in each body.
    pub slave_edges: Vec<usize>,
    pub master_edges: Vec<usize>,
}

impl ContactTrace {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn midpoint(&self, l: usize) -> Point {
        nalgebra::center(&self.nodes[l], &self.nodes[l + 1])
    }

    pub fn edge_length(&self, l: usize) -> f64 {
        self.abscissae[l + 1] - self.abscissae[l]
    }

    pub fn to_json(&self, gap: &GapFunction) -> serde_json::Value {
        let pt = |p: &Point| [p.x, p.y];
        serde_json::json!({
            "line": self.line,
            "abscissae": self.abscissae,
            "nodes": self.nodes.iter().map(pt).collect::<Vec<_>>(),
            "midpoints": (0..self.n_edges()).map(|l| pt(&self.midpoint(l))).collect::<Vec<_>>(),
            "slave_vertices": self.slave_vertices,
            "master_vertices": self.master_vertices,
            "slave_edges": self.slave_edges,
            "master_edges": self.master_edges,
            "gap_nodes": self.abscissae.iter().map(|&s| gap.at(s).ok()).collect::<Vec<_>>(),
            "gap": gap,
        })
    }
}

/// Sorted union of two abscissa lists, merging values closer than `tol`
/// (the first list wins).
fn merged_union(a: &[f64], b: &[f64], tol: f64) -> Vec<f64> {
    let mut all: Vec<(f64, u8)> = a.iter().map(|&s| (s, 0)).chain(b.iter().map(|&s| (s, 1))).collect();
    all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
    let mut out: Vec<(f64, u8)> = Vec::with_capacity(all.len());
    for (s, src) in all {
        match out.last_mut() {
            Some(last) if (s - last.0).abs() <= tol => {
                if src == 0 && last.1 == 1 {
                    *last = (s, 0);
                }
            }
            _ => out.push((s, src)),
        }
    }
    out.into_iter().map(|(s, _)| s).collect()
}

/// Inserts into `mesh` the nodes at the given abscissae that it does not have yet
/// and returns the vertex of every union node. OnLine bodies copy the partner's
/// coordinates; Projected bodies interpolate on the chord.
fn insert_nodes(
    mesh: &mut PolyMesh,
    line: &ContactLine,
    mode: TraceMode,
    union: &[f64],
    partner_points: &[(f64, Point)],
    tol: f64,
) -> Result<Vec<usize>> {
    let trace = extract_trace(mesh, line, mode)?;
    let mut splits: Vec<(usize, Vec<Point>)> = Vec::new();
    let mut plan: Vec<Option<usize>> = vec![None; union.len()];
    let mut pending: Vec<(usize, usize, usize)> = Vec::new(); // (union index, split request, position)
    let mut j = 0;
    for (u, &s) in union.iter().enumerate() {
        while j + 1 < trace.len() && trace[j + 1].s <= s + tol {
            j += 1;
        }
        if (trace[j].s - s).abs() <= tol {
            plan[u] = Some(trace[j].vertex);
            continue;
        }
        if j + 1 >= trace.len() || s < trace[j].s {
            return Err(VemError::InvalidPairing(format!("abscissa {s} outside the contact trace")));
        }
        let (a, b) = (trace[j], trace[j + 1]);
        let edge = mesh
            .find_edge(a.vertex, b.vertex)
            .ok_or_else(|| VemError::InvalidPairing("missing contact edge".into()))?;
        let p = match mode {
            TraceMode::OnLine => partner_points
                .iter()
                .find(|(ps, _)| (ps - s).abs() <= tol)
                .map(|&(_, p)| p)
                .unwrap_or_else(|| line.point_at(s)),
            TraceMode::Projected => {
                let (pa, pb) = (mesh.vertex(a.vertex), mesh.vertex(b.vertex));
                pa + (pb - pa) * ((s - a.s) / (b.s - a.s))
            }
        };
        let req = match splits.iter().position(|(e, _)| *e == edge) {
            Some(r) => r,
            None => {
                splits.push((edge, Vec::new()));
                splits.len() - 1
            }
        };
        pending.push((u, req, splits[req].1.len()));
        splits[req].1.push(p);
    }
    if !splits.is_empty() {
        let created = mesh.split_boundary_edges(&splits)?;
        for (u, req, pos) in pending {
            plan[u] = Some(created[req][pos]);
        }
    }
    Ok(plan.into_iter().map(|v| v.unwrap()).collect())
}

/// Node insertion: each body receives the other's contact nodes so that both
/// traces share one decomposition. Body 1 (the slave) is `slave`.
pub fn insert_matching_nodes(
    slave: &PolyMesh,
    slave_mode: TraceMode,
    master: &PolyMesh,
    master_mode: TraceMode,
    line: &ContactLine,
) -> Result<(PolyMesh, PolyMesh, ContactTrace)> {
    let t1 = extract_trace(slave, line, slave_mode)?;
    let t2 = extract_trace(master, line, master_mode)?;
    let span = (t1.last().unwrap().s - t1[0].s).abs().max((t2.last().unwrap().s - t2[0].s).abs());
    let tol = 1e-12 * span.max(span_scale(slave)).max(span_scale(master));
    if (t1[0].s - t2[0].s).abs() > tol || (t1.last().unwrap().s - t2.last().unwrap().s).abs() > tol {
        return Err(VemError::InvalidPairing(format!(
            "contact traces span [{}, {}] and [{}, {}]",
            t1[0].s,
            t1.last().unwrap().s,
            t2[0].s,
            t2.last().unwrap().s
        )));
    }
    let s1: Vec<f64> = t1.iter().map(|n| n.s).collect();
    let s2: Vec<f64> = t2.iter().map(|n| n.s).collect();
    let union = merged_union(&s1, &s2, tol);
    let pts1: Vec<(f64, Point)> = t1.iter().map(|n| (n.s, slave.vertex(n.vertex))).collect();
    let pts2: Vec<(f64, Point)> = t2.iter().map(|n| (n.s, master.vertex(n.vertex))).collect();
    let mut m1 = slave.clone();
    let mut m2 = master.clone();
    let v1 = insert_nodes(&mut m1, line, slave_mode, &union, &pts2, tol)?;
    let v2 = insert_nodes(&mut m2, line, master_mode, &union, &pts1, tol)?;
    let edge_chain = |m: &PolyMesh, vs: &[usize]| -> Result<Vec<usize>> {
        vs.windows(2)
            .map(|w| {
                m.find_edge(w[0], w[1])
                    .filter(|&e| m.edge(e).label == Some(BoundaryLabel::Contact))
                    .ok_or_else(|| VemError::InvalidPairing("contact decomposition mismatch".into()))
            })
            .collect()
    };
    let slave_edges = edge_chain(&m1, &v1)?;
    let master_edges = edge_chain(&m2, &v2)?;
    let nodes: Vec<Point> = union
        .iter()
        .zip(&v1)
        .map(|(&s, &v)| match slave_mode {
            TraceMode::OnLine => m1.vertex(v),
            TraceMode::Projected => line.point_at(s),
        })
        .collect();
    let trace = ContactTrace {
        line: *line,
        abscissae: union,
        nodes,
        slave_vertices: v1,
        master_vertices: v2,
        slave_edges,
        master_edges,
    };
    Ok((m1, m2, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_square_mesh, perturb_contact_band, Rect};

    fn line() -> ContactLine {
        ContactLine::new(Point::new(0.0, 0.0), Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)).unwrap()
    }

    fn bodies(n1: usize, n2: usize) -> (PolyMesh, PolyMesh) {
        let label = |m: &mut PolyMesh| {
            m.label_boundary(|p, _| {
                Some(if p.y.abs() < 1e-12 { BoundaryLabel::Contact } else { BoundaryLabel::Dirichlet })
            })
        };
        let mut a = crate::mesh::build_square_mesh_body(&Rect::new(0.0, -1.0, 1.0, 0.0), n1, 1).unwrap();
        let mut b = crate::mesh::build_square_mesh_body(&Rect::new(0.0, 0.0, 1.0, 1.0), n2, 2).unwrap();
        label(&mut a);
        label(&mut b);
        (a, b)
    }

    #[test]
    fn trace_of_square_mesh() {
        let (_, b) = bodies(1, 2);
        let t = extract_trace(&b, &line(), TraceMode::OnLine).unwrap();
        let s: Vec<f64> = t.iter().map(|n| n.s).collect();
        assert_eq!(s, vec![0.0, 0.5, 1.0]);
        let bare = build_square_mesh(&Rect::new(0.0, 0.0, 1.0, 1.0), 2).unwrap();
        assert!(extract_trace(&bare, &line(), TraceMode::OnLine).is_err());
    }

    #[test]
    fn insertion_gives_sorted_union() {
        let (a, b) = bodies(2, 4);
        let (a2, b2, tr) = insert_matching_nodes(&a, TraceMode::OnLine, &b, TraceMode::OnLine, &line()).unwrap();
        assert_eq!(tr.abscissae, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        for l in 0..tr.n_nodes() {
            assert!((a2.vertex(tr.slave_vertices[l]) - b2.vertex(tr.master_vertices[l])).norm() <= 1e-12);
        }
        assert!((a2.total_area() - a.total_area()).abs() < 1e-13);
        for c in 0..a.n_cells() {
            let (g0, g1) = (a.cell_geometry(c), a2.cell_geometry(c));
            assert!((g0.area - g1.area).abs() <= 1e-13 * g0.area);
            assert!((g0.perimeter - g1.perimeter).abs() <= 1e-13 * g0.perimeter);
        }
        // idempotence
        let (a3, b3, tr3) = insert_matching_nodes(&a2, TraceMode::OnLine, &b2, TraceMode::OnLine, &line()).unwrap();
        assert_eq!(a3.vertices(), a2.vertices());
        assert_eq!(b3.cells(), b2.cells());
        assert_eq!(tr3.abscissae, tr.abscissae);
    }

    #[test]
    fn matching_meshes_unchanged() {
        let (a, b) = bodies(4, 4);
        let (a2, b2, tr) = insert_matching_nodes(&a, TraceMode::OnLine, &b, TraceMode::OnLine, &line()).unwrap();
        assert_eq!(a2.vertices(), a.vertices());
        assert_eq!(b2.vertices(), b.vertices());
        assert_eq!(tr.n_edges(), 4);
    }

    #[test]
    fn perturbed_insertion_creates_small_edges() {
        let (a, b) = bodies(8, 8);
        let h = a.max_diameter();
        let a = perturb_contact_band(&a, (0.01, 0.02), 3).unwrap();
        let (_, _, tr) = insert_matching_nodes(&a, TraceMode::OnLine, &b, TraceMode::OnLine, &line()).unwrap();
        let small = (0..tr.n_edges())
            .filter(|&l| {
                let e = tr.edge_length(l);
                e >= 0.01 * h * (1.0 - 1e-9) && e <= 0.02 * h * (1.0 + 1e-9)
            })
            .count();
        assert!(small >= 1);
        assert!(tr.abscissae.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn different_spans_rejected() {
        let (a, _) = bodies(2, 2);
        let mut b = crate::mesh::build_square_mesh_body(&Rect::new(0.0, 0.0, 2.0, 1.0), 2, 2).unwrap();
        b.label_boundary(|p, _| Some(if p.y.abs() < 1e-12 { BoundaryLabel::Contact } else { BoundaryLabel::Neumann }));
        let r = insert_matching_nodes(&a, TraceMode::OnLine, &b, TraceMode::OnLine, &line());
        assert!(matches!(r, Err(VemError::InvalidPairing(_))));
    }

    #[test]
    fn gap_functions() {
        assert_eq!(GapFunction::Zero.at(0.3).unwrap(), 0.0);
        let c = GapFunction::Circular { radius: 0.5, touch: 0.0 };
        assert_eq!(c.at(0.0).unwrap(), 0.0);
        assert!((c.at(0.3).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(c.at(0.6), Err(VemError::Domain(_))));
        let t = GapFunction::tabulated(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert!((t.at(0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!((t.mean(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let x = Point::new(0.3, 1e-3);
        assert!(evaluate_gap(&c, &line(), &x).is_err());
    }

    #[test]
    fn trace_json_has_pairing() {
        let (a, b) = bodies(2, 3);
        let (_, _, tr) = insert_matching_nodes(&a, TraceMode::OnLine, &b, TraceMode::OnLine, &line()).unwrap();
        let j = tr.to_json(&GapFunction::Zero);
        assert_eq!(j["nodes"].as_array().unwrap().len(), tr.n_nodes());
        assert_eq!(j["slave_vertices"].as_array().unwrap().len(), tr.n_nodes());
    }
}
