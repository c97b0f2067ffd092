use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::recover_contact_pressure;
use crate::assembly::{assemble, build_contact_constraints, BodyProblem, Material, Pin, RowKind};
use crate::contact::{insert_matching_nodes, ContactLine, ContactTrace, GapFunction, TraceMode};
use crate::error::{Result, VemError};
use crate::mesh::{build_half_disk_mesh, build_square_mesh_body, BoundaryLabel, Point, PolyMesh, Rect};
use crate::solver::{solve, ContactSolution, KktReport, UzawaConfig};
use crate::vem::StabMode;

/// Half-disk of radius `R` (centre `(0, R)`, slave) pressed by a uniform pressure
/// on its flat top onto the square `(-L/2, L/2)×(-L, 0)` (master), clamped at the bottom.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HertzSpec {
    pub radius: f64,
    pub length: f64,
    pub pressure: f64,
    pub e_disk: f64,
    pub nu_disk: f64,
    pub e_square: f64,
    pub nu_square: f64,
    /// Cells per side of the square mesh.
    pub square_divisions: usize,
}

impl Default for HertzSpec {
    fn default() -> Self {
        HertzSpec {
            radius: 0.5,
            length: 1.0,
            pressure: 2.5,
            e_disk: 70.0,
            nu_disk: 0.3,
            e_square: 70000.0,
            nu_square: 0.4999,
            square_divisions: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HertzReference {
    pub e_star: f64,
    /// Contact half-width.
    pub b: f64,
    /// Peak contact pressure (positive).
    pub p_max: f64,
}

impl HertzSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.radius, self.length, self.pressure, self.e_disk, self.e_square];
        if positive.iter().any(|v| !(*v > 0.0)) || !(0.0..0.5).contains(&self.nu_disk) || !(0.0..0.5).contains(&self.nu_square) {
            return Err(VemError::InvalidArgument(format!("invalid Hertz data {self:?}")));
        }
        if self.length < 2.0 * self.radius {
            return Err(VemError::InvalidArgument("the square must be at least as wide as the disk".into()));
        }
        if self.square_divisions == 0 {
            return Err(VemError::InvalidArgument("square mesh needs at least one division".into()));
        }
        Ok(())
    }
}

pub fn hertz_reference(spec: &HertzSpec) -> HertzReference {
    let inv = (1.0 - spec.nu_square.powi(2)) / spec.e_square + (1.0 - spec.nu_disk.powi(2)) / spec.e_disk;
    let e_star = 1.0 / inv;
    let (r, p) = (spec.radius, spec.pressure);
    let b = 2.0 * (2.0 * r * r * p / (PI * e_star)).sqrt();
    HertzReference {
        e_star,
        b,
        p_max: 4.0 * r * p / (PI * b),
    }
}

impl HertzReference {
    /// Contact pressure magnitude `(4Rp/(πb²)) sqrt(b² - x²)`, zero outside `|x| < b`.
    pub fn pressure_at(&self, spec: &HertzSpec, x: f64) -> f64 {
        if x.abs() >= self.b {
            return 0.0;
        }
        4.0 * spec.radius * spec.pressure / (PI * self.b * self.b) * (self.b * self.b - x * x).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub x: f64,
    /// Recovered normal stress (negative in compression).
    pub sigma_n: f64,
    /// Closed-form normal stress, `-p_n(x)`.
    pub exact: f64,
    /// Multiplier of the vertex constraint row.
    pub multiplier: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HertzRun {
    pub disk_cells: usize,
    pub k: usize,
    pub reference: HertzReference,
    pub profile: Vec<ProfilePoint>,
    /// Largest recovered `|σ_n^h|`.
    pub p_max: f64,
    /// Midpoint between the outermost active node and its inactive neighbour,
    /// averaged over both sides.
    pub half_width: f64,
    /// Largest `|σ_n^h(x) - σ_n^h(-x)|` over mirrored nodes, relative to `p_max`.
    pub asymmetry: f64,
    pub iterations: usize,
    pub kkt: KktReport,
    pub ndof_u: usize,
    pub ndof_p: usize,
    #[serde(skip)]
    pub meshes: (PolyMesh, PolyMesh),
    #[serde(skip)]
    pub history_csv: String,
}

impl HertzRun {
    /// CSV with columns `x,sigma_n,p_n_exact`.
    pub fn profile_csv(&self) -> String {
        let mut s = String::from("x,sigma_n,p_n_exact\n");
        for p in &self.profile {
            writeln!(s, "{:e},{:e},{:e}", p.x, p.sigma_n, p.exact).unwrap();
        }
        s
    }
}

/// Disk mesh parameters `(n, m)` for a cell count `n²` with `m = n/4`.
fn disk_layout(cells: usize) -> Result<(usize, usize)> {
    let n = (cells as f64).sqrt().round() as usize;
    if n * n != cells || n < 4 || n % 4 != 0 {
        return Err(VemError::InvalidArgument(format!("disk cell count {cells} must be n² with n a multiple of 4")));
    }
    Ok((n, n / 4))
}

pub fn hertz_meshes(spec: &HertzSpec, disk_cells: usize) -> Result<(PolyMesh, PolyMesh)> {
    spec.validate()?;
    let (n, m) = disk_layout(disk_cells)?;
    let r = spec.radius;
    let mut disk = build_half_disk_mesh(Point::new(0.0, r), r, n, m, 1)?;
    disk.label_boundary(|p, _| Some(if (p.y - r).abs() < 1e-12 { BoundaryLabel::Neumann } else { BoundaryLabel::Contact }));
    let half = 0.5 * spec.length;
    let mut square = build_square_mesh_body(&Rect::new(-half, -spec.length, half, 0.0), spec.square_divisions, 2)?;
    square.label_boundary(|p, _| {
        Some(if p.y.abs() < 1e-12 {
            BoundaryLabel::Contact
        } else if (p.y + spec.length).abs() < 1e-12 {
            BoundaryLabel::Dirichlet
        } else {
            BoundaryLabel::Neumann
        })
    });
    Ok((disk, square))
}

fn half_width(trace: &ContactTrace, sol: &ContactSolution, cc: &crate::assembly::ContactConstraints) -> f64 {
    let ymax = sol.y.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut active = vec![false; trace.n_nodes()];
    for (r, kind) in cc.kinds.iter().enumerate() {
        if let RowKind::Vertex(l) = *kind {
            active[l] = sol.y[r] > 1e-8 * ymax;
        }
    }
    let s = &trace.abscissae;
    let right = (0..s.len()).rev().find(|&l| active[l]);
    let left = (0..s.len()).find(|&l| active[l]);
    match (left, right) {
        (Some(a), Some(b)) => {
            let rb = if b + 1 < s.len() { 0.5 * (s[b] + s[b + 1]) } else { s[b] };
            let lb = if a > 0 { 0.5 * (s[a] + s[a - 1]) } else { s[a] };
            0.5 * (rb - lb)
        }
        _ => 0.0,
    }
}

pub fn run_hertz(spec: &HertzSpec, disk_cells: usize, k: usize, stab: StabMode, cfg: &UzawaConfig) -> Result<HertzRun> {
    let (disk, square) = hertz_meshes(spec, disk_cells)?;
    let line = ContactLine::new(Point::new(0.0, 0.0), Vector2::new(1.0, 0.0), Vector2::new(0.0, -1.0))?;
    let (disk, square, trace) = insert_matching_nodes(&disk, TraceMode::Projected, &square, TraceMode::OnLine, &line)?;

    let mut top = BodyProblem::new(disk, Material::from_young(spec.e_disk, spec.nu_disk)?);
    let p = spec.pressure;
    top.traction = Some(Arc::new(move |_, n| -n * p));
    top.pins = (0..top.mesh.n_vertices())
        .filter(|&v| top.mesh.vertex(v).x.abs() < 1e-12)
        .map(|vertex| Pin {
            vertex,
            component: 0,
            value: 0.0,
        })
        .collect();
    let bottom = BodyProblem::new(square, Material::from_young(spec.e_square, spec.nu_square)?);
    let system = assemble(&[top, bottom], k, stab)?;
    let gap = GapFunction::Circular {
        radius: spec.radius,
        touch: 0.0,
    };
    let cc = build_contact_constraints(&system, &trace, &gap)?;
    let sol = solve(&system, &cc, cfg)?;

    let reference = hertz_reference(spec);
    let sigma = recover_contact_pressure(&system, &sol.u, &sol.p, &trace);
    let mut vertex_mult = vec![0.0; trace.n_nodes()];
    for (r, kind) in cc.kinds.iter().enumerate() {
        if let RowKind::Vertex(l) = *kind {
            vertex_mult[l] = sol.y[r];
        }
    }
    let profile: Vec<ProfilePoint> = (0..trace.n_nodes())
        .map(|l| ProfilePoint {
            x: trace.abscissae[l],
            sigma_n: sigma[l],
            exact: -reference.pressure_at(spec, trace.abscissae[l]),
            multiplier: vertex_mult[l],
        })
        .collect();
    let p_max = sigma.iter().fold(0.0_f64, |a, s| a.max(s.abs()));
    let mut asym = 0.0_f64;
    for a in &profile {
        if let Some(b) = profile.iter().find(|b| (b.x + a.x).abs() <= 1e-9 * spec.radius) {
            asym = asym.max((a.sigma_n - b.sigma_n).abs());
        }
    }
    Ok(HertzRun {
        disk_cells,
        k,
        reference,
        half_width: half_width(&trace, &sol, &cc),
        asymmetry: if p_max > 0.0 { asym / p_max } else { 0.0 },
        p_max,
        profile,
        iterations: sol.iterations,
        kkt: sol.kkt,
        ndof_u: system.n_u,
        ndof_p: system.n_p,
        meshes: (system.bodies[0].mesh.clone(), system.bodies[1].mesh.clone()),
        history_csv: sol.history_csv(),
    })
}
