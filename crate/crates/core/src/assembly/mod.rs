//! Global numbering, assembly of the mixed system, Dirichlet elimination and
//! contact constraint rows.

mod sparse;

pub use sparse::CsrMatrix;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::contact::{ContactTrace, GapFunction};
use crate::error::{Result, VemError};
use crate::mesh::{BoundaryLabel, Point, PolyMesh};
use crate::quadrature::polygon_rule;
use crate::vem::{local_element, LocalElement, StabMode};

pub type VectorField = Arc<dyn Fn(&Point) -> Vector2<f64> + Send + Sync>;
/// Traction as a function of the point and the outward unit normal.
pub type TractionField = Arc<dyn Fn(&Point, &Vector2<f64>) -> Vector2<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
}

impl Material {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
            return Err(VemError::InvalidArgument(format!("Lamé parameters ({lambda}, {mu}) must be positive")));
        }
        Ok(Material { lambda, mu })
    }

    /// Plane-strain Lamé parameters from Young's modulus and Poisson's ratio.
    pub fn from_young(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0 && nu > 0.0 && nu < 0.5) {
            return Err(VemError::InvalidArgument(format!("E = {e}, nu = {nu} out of range")));
        }
        Material::new(e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)), e / (2.0 * (1.0 + nu)))
    }
}

/// A displacement component fixed at a vertex, independent of edge labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pin {
    pub vertex: usize,
    pub component: usize,
    pub value: f64,
}

/// Everything needed to assemble one body.
#[derive(Clone)]
pub struct BodyProblem {
    pub mesh: PolyMesh,
    pub material: Material,
    /// Volume force; `None` means zero.
    pub load: Option<VectorField>,
    /// Traction on Neumann edges; `None` means traction-free.
    pub traction: Option<TractionField>,
    /// Displacement on Dirichlet edges; `None` means zero.
    pub dirichlet: Option<VectorField>,
    pub pins: Vec<Pin>,
}

impl BodyProblem {
    pub fn new(mesh: PolyMesh, material: Material) -> Self {
        BodyProblem {
            mesh,
            material,
            load: None,
            traction: None,
            dirichlet: None,
            pins: Vec::new(),
        }
    }
}

/// Global indices of one body's unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BodyDofs {
    pub k: usize,
    pub offset_u: usize,
    pub n_u: usize,
    pub offset_p: usize,
    pub n_p: usize,
    n_vertices: usize,
    n_edges: usize,
}

impl BodyDofs {
    fn new(k: usize, mesh: &PolyMesh, offset_u: usize, offset_p: usize) -> Self {
        let nv = mesh.n_vertices();
        let ne = mesh.n_edges();
        let nc = mesh.n_cells();
        let n_u = match k {
            1 => 2 * nv + ne,
            _ => 2 * nv + 2 * ne + 2 * nc,
        };
        BodyDofs {
            k,
            offset_u,
            n_u,
            offset_p,
            n_p: nc * k * (k + 1) / 2,
            n_vertices: nv,
            n_edges: ne,
        }
    }

    pub fn vertex(&self, v: usize, comp: usize) -> usize {
        self.offset_u + 2 * v + comp
    }

    /// k = 1: the normal value (global edge normal) at the midpoint; `comp` is ignored.
    /// k = 2: component `comp` at the midpoint.
    pub fn edge(&self, e: usize, comp: usize) -> usize {
        match self.k {
            1 => self.offset_u + 2 * self.n_vertices + e,
            _ => self.offset_u + 2 * self.n_vertices + 2 * e + comp,
        }
    }

    pub fn interior(&self, cell: usize, j: usize) -> usize {
        debug_assert_eq!(self.k, 2);
        self.offset_u + 2 * self.n_vertices + 2 * self.n_edges + 2 * cell + j
    }

    pub fn pressure(&self, cell: usize, j: usize) -> usize {
        self.offset_p + self.k * (self.k + 1) / 2 * cell + j
    }

    /// Local → global map of one cell as `(index, sign)`; the sign flips k = 1
    /// midpoint DOFs whose local outward normal opposes the global edge normal.
    pub fn cell_map(&self, mesh: &PolyMesh, cell: usize) -> Vec<(usize, f64)> {
        let loop_ = &mesh.cells()[cell];
        let nv = loop_.len();
        let edges = mesh.cell_edges(cell);
        let mut map = Vec::with_capacity(4 * nv + 2);
        for &v in loop_ {
            map.push((self.vertex(v, 0), 1.0));
            map.push((self.vertex(v, 1), 1.0));
        }
        for i in 0..nv {
            match self.k {
                1 => {
                    let sign = if loop_[i] < loop_[(i + 1) % nv] { 1.0 } else { -1.0 };
                    map.push((self.edge(edges[i], 0), sign));
                }
                _ => {
                    map.push((self.edge(edges[i], 0), 1.0));
                    map.push((self.edge(edges[i], 1), 1.0));
                }
            }
        }
        if self.k == 2 {
            map.push((self.interior(cell, 0), 1.0));
            map.push((self.interior(cell, 1), 1.0));
        }
        map
    }
}

#[derive(Clone, Debug)]
pub struct AssembledBody {
    pub mesh: PolyMesh,
    pub material: Material,
    pub dofs: BodyDofs,
    pub elements: Vec<LocalElement>,
    pub cell_maps: Vec<Vec<(usize, f64)>>,
}

impl AssembledBody {
    /// Local DOF vector of one cell extracted from a global displacement vector.
    pub fn local_dofs(&self, cell: usize, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.cell_maps[cell].len(), self.cell_maps[cell].iter().map(|&(g, s)| s * u[g]))
    }

    pub fn local_pressure(&self, cell: usize, p: &DVector<f64>) -> DVector<f64> {
        let nq = self.elements[cell].n_pressure();
        DVector::from_fn(nq, |j, _| p[self.dofs.pressure(cell, j)])
    }
}

/// The assembled mixed system `[[A, Bᵀ], [B, -C_λ]]` over both bodies.
#[derive(Clone, Debug)]
pub struct GlobalSystem {
    pub k: usize,
    pub stab_mode: StabMode,
    pub n_u: usize,
    pub n_p: usize,
    pub bodies: Vec<AssembledBody>,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub c: CsrMatrix,
    pub f: DVector<f64>,
    /// Values of Dirichlet and pinned DOFs.
    pub prescribed: Vec<Option<f64>>,
}

impl GlobalSystem {
    /// Writes the DOF interpolant of `u` on body `b` into the global vector `out`.
    pub fn interpolate_body<U, D>(&self, b: usize, u: U, div: D, out: &mut DVector<f64>) -> Result<()>
    where
        U: Fn(&Point) -> Vector2<f64>,
        D: Fn(&Point) -> f64,
    {
        let body = &self.bodies[b];
        for (c, el) in body.elements.iter().enumerate() {
            let d = el.interpolate(&u, &div, 2 * self.k + 2)?;
            for (i, &(g, s)) in body.cell_maps[c].iter().enumerate() {
                out[g] = s * d[i];
            }
        }
        Ok(())
    }

    /// Writes the cellwise L² projection of `p` onto `P_{k-1}` on body `b` into `out`.
    pub fn project_pressure_body<P>(&self, b: usize, p: P, out: &mut DVector<f64>) -> Result<()>
    where
        P: Fn(&Point) -> f64,
    {
        let body = &self.bodies[b];
        for (c, el) in body.elements.iter().enumerate() {
            let rule = polygon_rule(&el.geom, 2 * self.k + 2)?;
            let nq = el.n_pressure();
            let rhs = DVector::from_fn(nq, |j, _| {
                rule.integrate(|x| {
                    let (xi, eta) = crate::vem::poly::scaled(&el.geom, x);
                    p(x) * [1.0, xi, eta][j]
                })
            });
            let coef = el
                .pressure_mass
                .clone()
                .cholesky()
                .ok_or_else(|| VemError::Element {
                    cell: c,
                    reason: "singular pressure mass".into(),
                })?
                .solve(&rhs);
            for j in 0..nq {
                out[body.dofs.pressure(c, j)] = coef[j];
            }
        }
        Ok(())
    }

    /// Energy `½ uᵀA u + ½ pᵀC p − Fᵀu`.
    pub fn energy(&self, u: &DVector<f64>, p: &DVector<f64>) -> f64 {
        0.5 * u.dot(&self.a.mul_vec(u)) + 0.5 * p.dot(&self.c.mul_vec(p)) - self.f.dot(u)
    }
}

/// Mean of `f` over a cell.
fn cell_mean(geom: &crate::mesh::CellGeometry, f: &VectorField, degree: usize) -> Result<Vector2<f64>> {
    let rule = polygon_rule(geom, degree)?;
    let mut s = Vector2::zeros();
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        s += f(p) * w;
    }
    Ok(s / geom.area)
}

pub fn assemble(bodies: &[BodyProblem], k: usize, stab_mode: StabMode) -> Result<GlobalSystem> {
    if bodies.is_empty() || bodies.len() > 2 {
        return Err(VemError::InvalidArgument(format!("expected one or two bodies, got {}", bodies.len())));
    }
    if k != 1 && k != 2 {
        return Err(VemError::InvalidArgument(format!("unsupported order k = {k}")));
    }
    let mut assembled = Vec::with_capacity(bodies.len());
    let (mut off_u, mut off_p) = (0, 0);
    for body in bodies {
        body.mesh.check_labels()?;
        let dofs = BodyDofs::new(k, &body.mesh, off_u, off_p);
        off_u += dofs.n_u;
        off_p += dofs.n_p;
        let mut elements = Vec::with_capacity(body.mesh.n_cells());
        let mut cell_maps = Vec::with_capacity(body.mesh.n_cells());
        for c in 0..body.mesh.n_cells() {
            let geom = body.mesh.cell_geometry(c);
            elements.push(local_element(c, &geom, k, body.material.mu, stab_mode)?);
            cell_maps.push(dofs.cell_map(&body.mesh, c));
        }
        assembled.push(AssembledBody {
            mesh: body.mesh.clone(),
            material: body.material,
            dofs,
            elements,
            cell_maps,
        });
    }
    let (n_u, n_p) = (off_u, off_p);
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    let mut tc = Vec::new();
    let mut f = DVector::zeros(n_u);
    let mut prescribed = vec![None; n_u];
    let load_degree = 2 * k + 2;
    for (body, ab) in bodies.iter().zip(&assembled) {
        for (c, el) in ab.elements.iter().enumerate() {
            let map = &ab.cell_maps[c];
            if map.len() != el.n_dofs() {
                return Err(VemError::Assembly(format!("cell {c}: layout and mesh disagree")));
            }
            for (i, &(gi, si)) in map.iter().enumerate() {
                for (j, &(gj, sj)) in map.iter().enumerate() {
                    let v = el.stiffness[(i, j)];
                    if v != 0.0 {
                        ta.push((gi, gj, si * sj * v));
                    }
                }
            }
            for q in 0..el.n_pressure() {
                let gq = ab.dofs.pressure(c, q);
                for (j, &(gj, sj)) in map.iter().enumerate() {
                    let v = el.divergence[(q, j)];
                    if v != 0.0 {
                        tb.push((gq, gj, sj * v));
                    }
                }
                for r in 0..el.n_pressure() {
                    tc.push((gq, ab.dofs.pressure(c, r), el.pressure_mass[(q, r)] / ab.material.lambda));
                }
            }
            if let Some(load) = &body.load {
                let fbar = cell_mean(&el.geom, load, load_degree)?;
                let fl = el.load(&fbar);
                for (i, &(gi, si)) in map.iter().enumerate() {
                    f[gi] += si * fl[i];
                }
            }
        }
        let mesh = &ab.mesh;
        for (eid, edge) in mesh.edges().iter().enumerate() {
            match edge.label {
                Some(BoundaryLabel::Neumann) => {
                    if let Some(tr) = &body.traction {
                        let (c, i) = edge.cells[0];
                        let row = ab.elements[c].edge_row(i, 2 * k + 3, |x, n| tr(x, n));
                        for (j, &(gj, sj)) in ab.cell_maps[c].iter().enumerate() {
                            f[gj] += sj * row[j];
                        }
                    }
                }
                Some(BoundaryLabel::Dirichlet) => {
                    let value = |x: &Point| body.dirichlet.as_ref().map_or(Vector2::zeros(), |g| g(x));
                    for &v in &edge.vertices {
                        let val = value(&mesh.vertex(v));
                        prescribed[ab.dofs.vertex(v, 0)] = Some(val.x);
                        prescribed[ab.dofs.vertex(v, 1)] = Some(val.y);
                    }
                    let vm = value(&mesh.edge_midpoint(eid));
                    if k == 1 {
                        prescribed[ab.dofs.edge(eid, 0)] = Some(vm.dot(&mesh.edge_global_normal(eid)));
                    } else {
                        prescribed[ab.dofs.edge(eid, 0)] = Some(vm.x);
                        prescribed[ab.dofs.edge(eid, 1)] = Some(vm.y);
                    }
                }
                _ => {}
            }
        }
        for pin in &body.pins {
            if pin.vertex >= mesh.n_vertices() || pin.component > 1 {
                return Err(VemError::InvalidArgument(format!("bad pin {pin:?}")));
            }
            prescribed[ab.dofs.vertex(pin.vertex, pin.component)] = Some(pin.value);
        }
    }
    Ok(GlobalSystem {
        k,
        stab_mode,
        n_u,
        n_p,
        bodies: assembled,
        a: CsrMatrix::from_triplets(n_u, n_u, ta),
        b: CsrMatrix::from_triplets(n_p, n_u, tb),
        c: CsrMatrix::from_triplets(n_p, n_p, tc),
        f,
        prescribed,
    })
}

/// System restricted to the free displacement DOFs, with prescribed values lifted
/// into the right-hand side.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub free: Vec<usize>,
    pub free_index: Vec<Option<usize>>,
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub c: CsrMatrix,
    pub rhs_u: DVector<f64>,
    pub rhs_p: DVector<f64>,
    /// Full-length vector holding the prescribed values (zero on free DOFs).
    pub lifting: DVector<f64>,
}

impl ReducedSystem {
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn expand(&self, u_free: &DVector<f64>) -> DVector<f64> {
        let mut u = self.lifting.clone();
        for (i, &g) in self.free.iter().enumerate() {
            u[g] = u_free[i];
        }
        u
    }

    pub fn restrict(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.free.len(), self.free.iter().map(|&g| u[g]))
    }
}

/// Eliminates prescribed DOFs. Every prescribed entry must belong to a Dirichlet
/// edge or a pin of `system`.
pub fn apply_dirichlet(system: &GlobalSystem, values: &[Option<f64>]) -> Result<ReducedSystem> {
    if values.len() != system.n_u {
        return Err(VemError::InvalidArgument(format!(
            "{} boundary values for {} DOFs",
            values.len(),
            system.n_u
        )));
    }
    if let Some(i) = (0..system.n_u).find(|&i| values[i].is_some() && system.prescribed[i].is_none()) {
        return Err(VemError::InvalidArgument(format!("value given for DOF {i}, which is not on a Dirichlet boundary")));
    }
    let mut free = Vec::new();
    let mut free_index = vec![None; system.n_u];
    let mut lifting = DVector::zeros(system.n_u);
    for i in 0..system.n_u {
        match values[i] {
            Some(v) => lifting[i] = v,
            None => {
                free_index[i] = Some(free.len());
                free.push(i);
            }
        }
    }
    let nf = free.len();
    let all_p: Vec<Option<usize>> = (0..system.n_p).map(Some).collect();
    let a = system.a.select(&free_index, nf, &free_index, nf);
    let b = system.b.select(&all_p, system.n_p, &free_index, nf);
    let au = system.a.mul_vec(&lifting);
    let bu = system.b.mul_vec(&lifting);
    let rhs_u = DVector::from_iterator(nf, free.iter().map(|&g| system.f[g] - au[g]));
    Ok(ReducedSystem {
        free,
        free_index,
        a,
        b,
        c: system.c.clone(),
        rhs_u,
        rhs_p: -bu,
        lifting,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    /// Normal jump at trace node `l`.
    Vertex(usize),
    /// Mean normal jump over trace edge `l`.
    EdgeMean(usize),
}

/// Rows of `G u <= g` acting on the full displacement vector.
#[derive(Clone, Debug)]
pub struct ContactConstraints {
    pub g: CsrMatrix,
    pub rhs: DVector<f64>,
    pub kinds: Vec<RowKind>,
    /// Factor that turns a row back into its unscaled form (`|e|` for edge rows).
    pub row_scale: Vec<f64>,
}

impl ContactConstraints {
    pub fn empty(n_u: usize) -> Self {
        ContactConstraints {
            g: CsrMatrix::zeros(0, n_u),
            rhs: DVector::zeros(0),
            kinds: Vec::new(),
            row_scale: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.kinds.len()
    }
}

/// Normal displacement `v·n¹` at the midpoint of mesh edge `e`, as DOF coefficients.
fn midpoint_normal_row(body: &AssembledBody, e: usize, n1: &Vector2<f64>, sign: f64, row: &mut BTreeMap<usize, f64>) {
    let d = body.dofs;
    let mut add = |i: usize, v: f64| *row.entry(i).or_insert(0.0) += sign * v;
    if d.k == 2 {
        add(d.edge(e, 0), n1.x);
        add(d.edge(e, 1), n1.y);
        return;
    }
    let [a, b] = body.mesh.edge(e).vertices;
    let t = (body.mesh.vertex(b) - body.mesh.vertex(a)).normalize();
    let tn = t.dot(n1);
    for v in [a, b] {
        add(d.vertex(v, 0), 0.5 * tn * t.x);
        add(d.vertex(v, 1), 0.5 * tn * t.y);
    }
    add(d.edge(e, 0), body.mesh.edge_global_normal(e).dot(n1));
}

/// Vertex rows `⟦u_n⟧(x_l) <= g0(x_l)` and edge rows
/// `(1/|e|) ∫_e ⟦u_n⟧ <= mean_e g0` with `⟦u_n⟧ = (u¹ - u²)·n¹`.
pub fn build_contact_constraints(system: &GlobalSystem, trace: &ContactTrace, g0: &GapFunction) -> Result<ContactConstraints> {
    if system.bodies.len() != 2 {
        return Err(VemError::InvalidPairing("contact needs two bodies".into()));
    }
    let (slave, master) = (&system.bodies[0], &system.bodies[1]);
    let n1 = trace.line.normal();
    let nl = trace.n_nodes();
    if trace.slave_vertices.len() != nl || trace.master_vertices.len() != nl || trace.slave_edges.len() != nl - 1 || trace.master_edges.len() != nl - 1 {
        return Err(VemError::InvalidPairing("trace is not matched".into()));
    }
    for l in 0..nl - 1 {
        let ok = |b: &AssembledBody, e: usize, va: usize, vb: usize| {
            e < b.mesh.n_edges() && {
                let ev = b.mesh.edge(e).vertices;
                ev == [va.min(vb), va.max(vb)]
            }
        };
        if !ok(slave, trace.slave_edges[l], trace.slave_vertices[l], trace.slave_vertices[l + 1])
            || !ok(master, trace.master_edges[l], trace.master_vertices[l], trace.master_vertices[l + 1])
        {
            return Err(VemError::InvalidPairing(format!("trace edge {l} does not match the meshes")));
        }
    }
    let vertex_row = |l: usize| -> BTreeMap<usize, f64> {
        let mut r = BTreeMap::new();
        for (body, v, s) in [(slave, trace.slave_vertices[l], 1.0), (master, trace.master_vertices[l], -1.0)] {
            *r.entry(body.dofs.vertex(v, 0)).or_insert(0.0) += s * n1.x;
            *r.entry(body.dofs.vertex(v, 1)).or_insert(0.0) += s * n1.y;
        }
        r
    };
    let mut triplets = Vec::new();
    let mut rhs = Vec::new();
    let mut kinds = Vec::new();
    let mut row_scale = Vec::new();
    let mut push = |row: BTreeMap<usize, f64>, g: f64, kind: RowKind, scale: f64, triplets: &mut Vec<(usize, usize, f64)>| {
        let r = rhs.len();
        triplets.extend(row.into_iter().filter(|(_, v)| *v != 0.0).map(|(c, v)| (r, c, v)));
        rhs.push(g);
        kinds.push(kind);
        row_scale.push(scale);
    };
    for l in 0..nl {
        let g = g0.at(trace.abscissae[l])?;
        push(vertex_row(l), g, RowKind::Vertex(l), 1.0, &mut triplets);
    }
    for l in 0..nl - 1 {
        let mut row = BTreeMap::new();
        for (wt, node) in [(1.0 / 6.0, l), (1.0 / 6.0, l + 1)] {
            for (c, v) in vertex_row(node) {
                *row.entry(c).or_insert(0.0) += wt * v;
            }
        }
        let mut mid = BTreeMap::new();
        midpoint_normal_row(slave, trace.slave_edges[l], &n1, 1.0, &mut mid);
        midpoint_normal_row(master, trace.master_edges[l], &n1, -1.0, &mut mid);
        for (c, v) in mid {
            *row.entry(c).or_insert(0.0) += 4.0 / 6.0 * v;
        }
        let g = g0.mean(trace.abscissae[l], trace.abscissae[l + 1])?;
        push(row, g, RowKind::EdgeMean(l), trace.edge_length(l), &mut triplets);
    }
    let nr = kinds.len();
    Ok(ContactConstraints {
        g: CsrMatrix::from_triplets(nr, system.n_u, triplets),
        rhs: DVector::from_vec(rhs),
        kinds,
        row_scale,
    })
}
