use nalgebra::{DMatrix, DVector, Vector2};
use serde::Serialize;

use super::poly::{self, scaled, vector_basis, Poly, VecPoly};
use super::{DofLayout, StabMode};
use crate::error::{Result, VemError};
use crate::mesh::{CellGeometry, Point};
use crate::quadrature::{edge_rule, monomial_moments, MonomialMoments};

/// Quadratic trace of a virtual function on one edge, as values at the start,
/// midpoint and end of the edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeTrace {
    pub start: Vector2<f64>,
    pub mid: Vector2<f64>,
    pub end: Vector2<f64>,
}

/// Quadratic Lagrange basis on `{0, 1/2, 1}`.
pub(crate) fn lagrange3(t: f64) -> [f64; 3] {
    [2.0 * (t - 0.5) * (t - 1.0), 4.0 * t * (1.0 - t), 2.0 * t * (t - 0.5)]
}

impl EdgeTrace {
    pub fn at(&self, t: f64) -> Vector2<f64> {
        let l = lagrange3(t);
        self.start * l[0] + self.mid * l[1] + self.end * l[2]
    }
}

/// Linear map DOFs → value at one trace node.
type NodeMap = Vec<(usize, Vector2<f64>)>;

#[derive(Clone, Debug)]
pub struct LocalElement {
    pub k: usize,
    pub layout: DofLayout,
    pub geom: CellGeometry,
    pub mu: f64,
    pub stab_mode: StabMode,
    pub basis: Vec<VecPoly>,
    pub moments: MonomialMoments,
    /// DOFs → coefficients of `Π v` in `basis` (`n_p × n_dof`).
    pub projector: DMatrix<f64>,
    /// DOFs of each basis polynomial (`n_dof × n_p`).
    pub basis_dofs: DMatrix<f64>,
    pub consistency: DMatrix<f64>,
    pub stabilization: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// `∫_K div φ_j m_i` (`n_q × n_dof`).
    pub divergence: DMatrix<f64>,
    /// `∫_K m_i m_j` (`n_q × n_q`); the `1/λ` factor is applied at assembly.
    pub pressure_mass: DMatrix<f64>,
    /// `∫_K φ_j · e_d` for `d = x, y` (`2 × n_dof`).
    pub first_moments: DMatrix<f64>,
    /// 2-norm condition number of the projector system.
    pub projector_condition: f64,
    edge_nodes: Vec<[NodeMap; 3]>,
}

/// Builds every local matrix of one cell. `cell` is only used in error messages.
pub fn local_element(cell: usize, geom: &CellGeometry, k: usize, mu: f64, stab_mode: StabMode) -> Result<LocalElement> {
    let layout = DofLayout::new(k, geom.n_vertices())?;
    let fail = |reason: String| VemError::Element { cell, reason };
    if !(geom.area > 1e-14 * geom.diameter * geom.diameter) {
        return Err(fail(format!("degenerate cell, area {:e}", geom.area)));
    }
    if !(mu > 0.0) {
        return Err(fail(format!("shear modulus {mu} must be positive")));
    }
    let nv = geom.n_vertices();
    let ndof = layout.n_displacement();
    let h = geom.diameter;
    let basis = vector_basis(k);
    let np = basis.len();
    let moments = monomial_moments(geom, 4);

    let mut edge_nodes: Vec<[NodeMap; 3]> = Vec::with_capacity(nv);
    for i in 0..nv {
        let j = (i + 1) % nv;
        let unit = |d: usize, c: Vector2<f64>| (d, c);
        let ex = Vector2::new(1.0, 0.0);
        let ey = Vector2::new(0.0, 1.0);
        let start = vec![unit(layout.vertex(i, 0), ex), unit(layout.vertex(i, 1), ey)];
        let end = vec![unit(layout.vertex(j, 0), ex), unit(layout.vertex(j, 1), ey)];
        let mid = if k == 1 {
            let (a, b) = geom.edge(i);
            let t = (b - a).normalize();
            let n = geom.outward_normal(i);
            vec![
                (layout.vertex(i, 0), t * (0.5 * t.x)),
                (layout.vertex(i, 1), t * (0.5 * t.y)),
                (layout.vertex(j, 0), t * (0.5 * t.x)),
                (layout.vertex(j, 1), t * (0.5 * t.y)),
                (layout.midpoint_normal(i), n),
            ]
        } else {
            vec![unit(layout.midpoint(i, 0), ex), unit(layout.midpoint(i, 1), ey)]
        };
        edge_nodes.push([start, mid, end]);
    }

    let mut el = LocalElement {
        k,
        layout,
        geom: geom.clone(),
        mu,
        stab_mode,
        basis,
        moments,
        projector: DMatrix::zeros(np, ndof),
        basis_dofs: DMatrix::zeros(ndof, np),
        consistency: DMatrix::zeros(ndof, ndof),
        stabilization: DMatrix::zeros(ndof, ndof),
        stiffness: DMatrix::zeros(ndof, ndof),
        divergence: DMatrix::zeros(layout.n_pressure(), ndof),
        pressure_mass: DMatrix::zeros(layout.n_pressure(), layout.n_pressure()),
        first_moments: DMatrix::zeros(2, ndof),
        projector_condition: 1.0,
        edge_nodes,
    };
    let edge_degree = 2 * k + 1;

    for (b, p) in el.basis.iter().enumerate() {
        let col = el.dofs_of(p);
        el.basis_dofs.set_column(b, &col);
    }

    // ∫_K v_d = ∮ (x_d - x_K,d) v·n − ∫_K (x_d - x_K,d) div v
    let c = geom.centroid;
    for d in 0..2 {
        let mut row = el.boundary_row(edge_degree, |x, n| n * (x[d] - c[d]));
        if k == 2 {
            row[layout.interior(d)] -= geom.area;
        }
        el.first_moments.set_row(d, &row.transpose());
    }

    let strains: Vec<_> = el.basis.iter().map(|p| p.strain(h)).collect();
    let mut gram = DMatrix::zeros(np, np);
    for a in 3..np {
        for b in 3..np {
            gram[(a, b)] = strains[a].inner(&strains[b], &el.moments);
        }
    }

    // projector system G c = B(v)
    let perimeter = geom.perimeter;
    let rigid = |j: usize, x: &Point| -> Vector2<f64> {
        match j {
            0 => Vector2::new(1.0, 0.0),
            1 => Vector2::new(0.0, 1.0),
            _ => {
                let (xi, eta) = scaled(geom, x);
                Vector2::new(-eta, xi)
            }
        }
    };
    let mut g = DMatrix::zeros(np, np);
    let mut rhs = DMatrix::zeros(np, ndof);
    let rule = edge_rule(edge_degree);
    for j in 0..3 {
        for (b, p) in el.basis.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..nv {
                let (xa, xb) = geom.edge(i);
                let len = (xb - xa).norm();
                s += len * rule.integrate(|t| {
                    let x = xa + (xb - xa) * t;
                    p.eval_at(geom, &x).dot(&rigid(j, &x))
                });
            }
            g[(j, b)] = s / perimeter;
        }
        let row = el.boundary_row(edge_degree, |x, _| rigid(j, x) / perimeter);
        rhs.set_row(j, &row.transpose());
    }
    for a in 3..np {
        for b in 0..np {
            g[(a, b)] = gram[(a, b)];
        }
        let e = strains[a];
        let mut row = el.boundary_row(edge_degree, |x, n| {
            let (xi, eta) = scaled(geom, x);
            e.at(xi, eta) * n
        });
        if k == 2 {
            let cvec = el.basis[a].div_strain(h);
            row -= el.first_moments.row(0).transpose() * cvec.x + el.first_moments.row(1).transpose() * cvec.y;
        }
        rhs.set_row(a, &row.transpose());
    }
    let sv = g.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > 1e-14 * smax) {
        return Err(fail(format!("singular projector system (sigma_min {smin:e})")));
    }
    el.projector_condition = smax / smin;
    let lu = g.lu();
    el.projector = lu
        .solve(&rhs)
        .ok_or_else(|| fail("projector system could not be solved".into()))?;

    let mut cons = (el.projector.transpose() * &gram * &el.projector) * (2.0 * mu);
    cons = (&cons + cons.transpose()) * 0.5;
    let resid = DMatrix::identity(ndof, ndof) - &el.basis_dofs * &el.projector;
    let s = match stab_mode {
        StabMode::Scaled => 2.0 * mu,
        StabMode::Literal => 1.0,
    };
    let mut stab = resid.transpose() * &resid * s;
    stab = (&stab + stab.transpose()) * 0.5;
    el.stiffness = &cons + &stab;
    el.consistency = cons;
    el.stabilization = stab;

    let flux = el.boundary_row(edge_degree, |_, n| *n);
    el.divergence.set_row(0, &flux.transpose());
    if k == 2 {
        el.divergence[(1, layout.interior(0))] = geom.area / h;
        el.divergence[(2, layout.interior(1))] = geom.area / h;
    }
    let pb = poly::pressure_basis(k);
    for i in 0..pb.len() {
        for j in 0..pb.len() {
            el.pressure_mass[(i, j)] = poly::integrate_product(&pb[i], &pb[j], &el.moments);
        }
    }
    Ok(el)
}

impl LocalElement {
    pub fn n_dofs(&self) -> usize {
        self.layout.n_displacement()
    }

    pub fn n_pressure(&self) -> usize {
        self.layout.n_pressure()
    }

    /// `∮_{∂K} f(x, n)·v` as a row over the DOFs, using the quadratic edge traces.
    fn boundary_row<F>(&self, degree: usize, f: F) -> DVector<f64>
    where
        F: Fn(&Point, &Vector2<f64>) -> Vector2<f64>,
    {
        let mut row = DVector::zeros(self.n_dofs());
        for i in 0..self.geom.n_vertices() {
            self.add_edge_row(i, degree, &f, &mut row);
        }
        row
    }

    /// `∫_e f(x, n)·v` over local edge `i` as a row over the DOFs.
    pub fn edge_row<F>(&self, i: usize, degree: usize, f: F) -> DVector<f64>
    where
        F: Fn(&Point, &Vector2<f64>) -> Vector2<f64>,
    {
        let mut row = DVector::zeros(self.n_dofs());
        self.add_edge_row(i, degree, &f, &mut row);
        row
    }

    fn add_edge_row<F>(&self, i: usize, degree: usize, f: &F, row: &mut DVector<f64>)
    where
        F: Fn(&Point, &Vector2<f64>) -> Vector2<f64>,
    {
        let rule = edge_rule(degree);
        let (xa, xb) = self.geom.edge(i);
        let len = (xb - xa).norm();
        let n = self.geom.outward_normal(i);
        for (&t, &w) in rule.points.iter().zip(&rule.weights) {
            let x = xa + (xb - xa) * t;
            let gval = f(&x, &n);
            let l = lagrange3(t);
            for (m, node) in self.edge_nodes[i].iter().enumerate() {
                for &(d, c) in node {
                    row[d] += w * len * l[m] * gval.dot(&c);
                }
            }
        }
    }

    /// DOF vector of a polynomial expressed in the local scaled basis.
    pub fn dofs_of(&self, p: &VecPoly) -> DVector<f64> {
        let g = &self.geom;
        let nv = g.n_vertices();
        let l = self.layout;
        let mut d = DVector::zeros(l.n_displacement());
        for i in 0..nv {
            let v = p.eval_at(g, &g.vertices[i]);
            d[l.vertex(i, 0)] = v.x;
            d[l.vertex(i, 1)] = v.y;
            let (a, b) = g.edge(i);
            let vm = p.eval_at(g, &nalgebra::center(&a, &b));
            if self.k == 1 {
                d[l.midpoint_normal(i)] = vm.dot(&g.outward_normal(i));
            } else {
                d[l.midpoint(i, 0)] = vm.x;
                d[l.midpoint(i, 1)] = vm.y;
            }
        }
        if self.k == 2 {
            let div = p.divergence(g.diameter);
            let s = g.diameter / g.area;
            let m2: Poly = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
            let m3: Poly = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
            d[l.interior(0)] = s * poly::integrate_product(&div, &m2, &self.moments);
            d[l.interior(1)] = s * poly::integrate_product(&div, &m3, &self.moments);
        }
        d
    }

    /// DOF vector of an arbitrary smooth field: nodal values on the boundary
    /// and, for k = 2, divergence moments evaluated with the given divergence.
    pub fn interpolate<U, D>(&self, u: U, div: D, degree: usize) -> Result<DVector<f64>>
    where
        U: Fn(&Point) -> Vector2<f64>,
        D: Fn(&Point) -> f64,
    {
        let g = &self.geom;
        let l = self.layout;
        let mut d = DVector::zeros(l.n_displacement());
        for i in 0..g.n_vertices() {
            let v = u(&g.vertices[i]);
            d[l.vertex(i, 0)] = v.x;
            d[l.vertex(i, 1)] = v.y;
            let (a, b) = g.edge(i);
            let vm = u(&nalgebra::center(&a, &b));
            if self.k == 1 {
                d[l.midpoint_normal(i)] = vm.dot(&g.outward_normal(i));
            } else {
                d[l.midpoint(i, 0)] = vm.x;
                d[l.midpoint(i, 1)] = vm.y;
            }
        }
        if self.k == 2 {
            let rule = crate::quadrature::polygon_rule(g, degree)?;
            let s = g.diameter / g.area;
            d[l.interior(0)] = s * rule.integrate(|x| div(x) * scaled(g, x).0);
            d[l.interior(1)] = s * rule.integrate(|x| div(x) * scaled(g, x).1);
        }
        Ok(d)
    }

    pub fn boundary_trace(&self, dofs: &DVector<f64>) -> Result<Vec<EdgeTrace>> {
        if dofs.len() != self.n_dofs() {
            return Err(VemError::InvalidArgument(format!(
                "expected {} DOFs, got {}",
                self.n_dofs(),
                dofs.len()
            )));
        }
        let node = |m: &NodeMap| m.iter().fold(Vector2::zeros(), |acc, &(d, c)| acc + c * dofs[d]);
        Ok(self
            .edge_nodes
            .iter()
            .map(|[s, m, e]| EdgeTrace {
                start: node(s),
                mid: node(m),
                end: node(e),
            })
            .collect())
    }

    /// Coefficients of `div v` over `m_1, m_2, m_3` (truncated to `P_{k-1}`).
    pub fn divergence_coefficients(&self, dofs: &DVector<f64>) -> DVector<f64> {
        let moments = &self.divergence * dofs;
        self.pressure_mass
            .clone()
            .cholesky()
            .expect("pressure mass is positive definite")
            .solve(&moments)
    }

    pub fn project(&self, dofs: &DVector<f64>) -> VecPoly {
        let c = &self.projector * dofs;
        VecPoly::combine(&self.basis, c.as_slice())
    }

    /// Load vector of the cell-constant force `f_mean`.
    pub fn load(&self, f_mean: &Vector2<f64>) -> DVector<f64> {
        (self.first_moments.row(0) * f_mean.x + self.first_moments.row(1) * f_mean.y).transpose()
    }

    /// `a^K(z, v) = 2μ [∮ (ε(z) n)·v − ∫ div ε(z)·v]` for a polynomial `z`, from
    /// the DOFs of `v` only.
    pub fn energy_against_polynomial(&self, z: &VecPoly, dofs: &DVector<f64>) -> f64 {
        let e = z.strain(self.geom.diameter);
        let g = &self.geom;
        let row = self.boundary_row(2 * self.k + 1, |x, n| {
            let (xi, eta) = scaled(g, x);
            e.at(xi, eta) * n
        });
        let c = z.div_strain(g.diameter);
        let interior = c.x * self.first_moments.row(0).dot(&dofs.transpose())
            + c.y * self.first_moments.row(1).dot(&dofs.transpose());
        2.0 * self.mu * (row.dot(dofs) - interior)
    }

    pub fn debug_dump(&self) -> ElementDebugDump {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        ElementDebugDump {
            k: self.k,
            vertices: self.geom.vertices.iter().map(|p| [p.x, p.y]).collect(),
            area: self.geom.area,
            centroid: [self.geom.centroid.x, self.geom.centroid.y],
            diameter: self.geom.diameter,
            projector: rows(&self.projector),
            consistency: rows(&self.consistency),
            stabilization: rows(&self.stabilization),
            divergence: rows(&self.divergence),
            pressure_mass: rows(&self.pressure_mass),
            first_moments: rows(&self.first_moments),
        }
    }
}

/// Row-major matrices of one cell for cross-implementation comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ElementDebugDump {
    pub k: usize,
    pub vertices: Vec<[f64; 2]>,
    pub area: f64,
    pub centroid: [f64; 2],
    pub diameter: f64,
    pub projector: Vec<Vec<f64>>,
    pub consistency: Vec<Vec<f64>>,
    pub stabilization: Vec<Vec<f64>>,
    pub divergence: Vec<Vec<f64>>,
    pub pressure_mass: Vec<Vec<f64>>,
    pub first_moments: Vec<Vec<f64>>,
}
