//! Benchmark problems: the two-square patch and trigonometric tests, the Hertz
//! half-disk, error norms, rate fitting and contact pressure recovery.

mod hertz;
mod manufactured;

pub use hertz::{hertz_reference, run_hertz, HertzReference, HertzRun, HertzSpec, ProfilePoint};
pub use manufactured::{patch_solution, trig_solution, ManufacturedSolution};

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, build_contact_constraints, BodyProblem, GlobalSystem};
use crate::contact::{insert_matching_nodes, ContactLine, ContactTrace, TraceMode};
use crate::error::{Result, VemError};
use crate::mesh::{
    build_hexagonal_mesh_body, build_square_mesh_body, build_web_mesh_body, perturb_contact_band, quality_report_pair, BoundaryLabel,
    Point, PolyMesh, Rect,
};
use crate::quadrature::polygon_rule;
use crate::solver::{kkt_report, solve, ContactSolution, KktReport, UzawaConfig};
use crate::vem::poly::{eval, pressure_basis, scaled};
use crate::vem::StabMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Squares.
    Q,
    /// Hexagon-dominated Voronoi cells.
    H,
    /// Relaxed random Voronoi cells.
    W,
}

impl Family {
    /// Cells per body at the four refinement levels.
    pub fn default_levels(self) -> [usize; 4] {
        match self {
            Family::Q | Family::H => [4, 16, 64, 256],
            Family::W => [8, 32, 128, 512],
        }
    }
}

impl std::str::FromStr for Family {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Q" | "q" => Ok(Family::Q),
            "H" | "h" => Ok(Family::H),
            "W" | "w" => Ok(Family::W),
            _ => Err(VemError::InvalidArgument(format!("unknown mesh family `{s}` (expected Q, H or W)"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Contact-line configuration of the two-square problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Configuration {
    /// Lower mesh is the mirror image of the upper one.
    IM,
    /// Lower contact nodes slid by 1–2% of `h_max`, so node insertion creates small edges.
    SE,
}

impl std::str::FromStr for Configuration {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('.', "").as_str() {
            "IM" => Ok(Configuration::IM),
            "SE" => Ok(Configuration::SE),
            _ => Err(VemError::InvalidArgument(format!("unknown configuration `{s}` (expected IM or SE)"))),
        }
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

pub const SMALL_EDGE_RANGE: (f64, f64) = (0.01, 0.02);

pub fn contact_line() -> ContactLine {
    ContactLine::new(Point::new(0.0, 0.0), Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)).expect("orthonormal")
}

/// Mesh of `(0,1)²` from one family with about `cells` cells.
pub fn family_mesh(family: Family, cells: usize, seed: u64, body_id: u8) -> Result<PolyMesh> {
    let rect = Rect::new(0.0, 0.0, 1.0, 1.0);
    match family {
        Family::Q => {
            let n = (cells as f64).sqrt().round() as usize;
            if n * n != cells || n == 0 {
                return Err(VemError::InvalidArgument(format!("square family needs a perfect square cell count, got {cells}")));
            }
            build_square_mesh_body(&rect, n, body_id)
        }
        Family::H => build_hexagonal_mesh_body(&rect, cells, body_id),
        Family::W => build_web_mesh_body(&rect, cells, seed, body_id),
    }
}

fn label_square_pair(m: &mut PolyMesh) {
    m.label_boundary(|p, _| {
        Some(if p.y.abs() < 1e-12 {
            BoundaryLabel::Contact
        } else if (p.y.abs() - 1.0).abs() < 1e-12 {
            BoundaryLabel::Dirichlet
        } else {
            BoundaryLabel::Neumann
        })
    });
}

/// Labelled slave `(0,1)×(-1,0)` and master `(0,1)²` meshes before node insertion.
pub fn square_pair(family: Family, cells: usize, config: Configuration, seed: u64) -> Result<(PolyMesh, PolyMesh)> {
    let mut upper = family_mesh(family, cells, seed, 2)?;
    label_square_pair(&mut upper);
    let mut lower = upper.mirrored_y(0.0, 1)?;
    label_square_pair(&mut lower);
    if config == Configuration::SE {
        lower = perturb_contact_band(&lower, SMALL_EDGE_RANGE, seed ^ 0x5E)?;
    }
    Ok((lower, upper))
}

fn body_from_solution(mesh: PolyMesh, exact: &ManufacturedSolution) -> BodyProblem {
    let mut body = BodyProblem::new(mesh, exact.material);
    let (e1, e2, e3) = (exact.clone(), exact.clone(), exact.clone());
    body.load = Some(Arc::new(move |x| e1.force(x)));
    body.traction = Some(Arc::new(move |x, n| e2.traction(x, n)));
    body.dirichlet = Some(Arc::new(move |x| e3.u(x)));
    body
}

/// Everything set up for one two-square run.
pub struct PairProblem {
    pub system: GlobalSystem,
    pub constraints: crate::assembly::ContactConstraints,
    pub trace: ContactTrace,
}

pub fn pair_problem(lower: &PolyMesh, upper: &PolyMesh, exact: &ManufacturedSolution, k: usize, stab: StabMode) -> Result<PairProblem> {
    let line = contact_line();
    let (m1, m2, trace) = insert_matching_nodes(lower, TraceMode::OnLine, upper, TraceMode::OnLine, &line)?;
    let system = assemble(&[body_from_solution(m1, exact), body_from_solution(m2, exact)], k, stab)?;
    let constraints = build_contact_constraints(&system, &trace, &exact.gap)?;
    Ok(PairProblem { system, constraints, trace })
}

/// `δ(u) = (Σ_K |u - Π u_h|²_{1,K})^{1/2}` and `δ(p) = ‖p - p_h‖_{L²}` over both bodies.
pub fn error_norms(system: &GlobalSystem, u: &DVector<f64>, p: &DVector<f64>, exact: &ManufacturedSolution) -> Result<(f64, f64)> {
    let basis = pressure_basis(system.k);
    let (mut eu, mut ep) = (0.0, 0.0);
    for body in &system.bodies {
        for (c, el) in body.elements.iter().enumerate() {
            let proj = el.project(&body.local_dofs(c, u));
            let pc = body.local_pressure(c, p);
            let rule = polygon_rule(&el.geom, 2 * system.k + 2)?;
            let h = el.geom.diameter;
            for (x, &w) in rule.points.iter().zip(&rule.weights) {
                let (xi, eta) = scaled(&el.geom, x);
                eu += w * (exact.grad(x) - proj.gradient(h, xi, eta)).norm_squared();
                let ph: f64 = basis.iter().zip(pc.iter()).map(|(m, c)| c * eval(m, xi, eta)).sum();
                ep += w * (exact.pressure(x) - ph).powi(2);
            }
        }
    }
    Ok((eu.sqrt(), ep.sqrt()))
}

/// Largest cellwise deviation of `p_h` from `λ Π⁰_{k-1} div u_h`, relative to
/// the largest pressure coefficient.
pub fn pressure_relation_residual(system: &GlobalSystem, u: &DVector<f64>, p: &DVector<f64>) -> f64 {
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    for body in &system.bodies {
        for (c, el) in body.elements.iter().enumerate() {
            let expect = el.divergence_coefficients(&body.local_dofs(c, u)) * body.material.lambda;
            let got = body.local_pressure(c, p);
            worst = worst.max((&got - &expect).amax());
            scale = scale.max(got.amax()).max(expect.amax());
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Normal stress `σ_n^h` at every trace node, averaged over the slave cells
/// sharing the node: `(2μ ε(Π u_h) + p_h I) n¹ · n¹`.
pub fn recover_contact_pressure(system: &GlobalSystem, u: &DVector<f64>, p: &DVector<f64>, trace: &ContactTrace) -> Vec<f64> {
    let slave = &system.bodies[0];
    let basis = pressure_basis(system.k);
    trace
        .slave_vertices
        .iter()
        .enumerate()
        .map(|(l, &v)| {
            let adjacent = [l.checked_sub(1), (l < trace.n_edges()).then_some(l)];
            let n = adjacent
                .iter()
                .flatten()
                .map(|&e| slave.mesh.boundary_outward_normal(trace.slave_edges[e]))
                .sum::<nalgebra::Vector2<f64>>()
                .normalize();
            let x = slave.mesh.vertex(v);
            let cells = slave.mesh.cells_of_vertex(v);
            let total: f64 = cells
                .iter()
                .map(|&c| {
                    let el = &slave.elements[c];
                    let proj = el.project(&slave.local_dofs(c, u));
                    let (xi, eta) = scaled(&el.geom, &x);
                    let eps = proj.strain(el.geom.diameter).at(xi, eta);
                    let pc = slave.local_pressure(c, p);
                    let ph: f64 = basis.iter().zip(pc.iter()).map(|(m, c)| c * eval(m, xi, eta)).sum();
                    let sigma = eps * (2.0 * slave.material.mu) + nalgebra::Matrix2::identity() * ph;
                    n.dot(&(sigma * n))
                })
                .sum();
            total / cells.len() as f64
        })
        .collect()
}

/// Solver and output settings of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub k: usize,
    pub stab: StabMode,
    pub solver: UzawaConfig,
    pub seed: u64,
    pub jobs: usize,
    /// Leave the coarsest level out of the rate fit.
    pub skip_coarsest: bool,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            k: 1,
            stab: StabMode::Scaled,
            solver: UzawaConfig::default(),
            seed: 1,
            jobs: 1,
            skip_coarsest: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub cells: usize,
    pub h: f64,
    pub ndof_u: usize,
    pub ndof_p: usize,
    pub delta_u: f64,
    pub delta_p: f64,
    pub iters: usize,
    pub log_factor: f64,
    pub h_m: f64,
    pub contact_rows: usize,
    pub kkt: KktReport,
    pub pressure_relation: f64,
    /// Mean recovered `σ_n^h` over the interior trace nodes.
    pub mean_sigma_n: f64,
}

/// One level of a study with the artifacts needed for output.
pub struct LevelRun {
    pub result: LevelResult,
    pub meshes: (PolyMesh, PolyMesh),
    pub solution: ContactSolution,
    pub problem: PairProblem,
}

pub fn run_level(exact: &ManufacturedSolution, family: Family, cells: usize, config: Configuration, settings: &StudySettings) -> Result<LevelRun> {
    let (lower, upper) = square_pair(family, cells, config, settings.seed)?;
    run_pair(exact, &lower, &upper, cells, settings)
}

/// Solves on a given labelled pair (slave below `y = 0`) and measures the errors.
pub fn run_pair(exact: &ManufacturedSolution, lower: &PolyMesh, upper: &PolyMesh, cells: usize, settings: &StudySettings) -> Result<LevelRun> {
    let problem = pair_problem(lower, upper, exact, settings.k, settings.stab)?;
    let solution = solve(&problem.system, &problem.constraints, &settings.solver)?;
    let sys = &problem.system;
    let (delta_u, delta_p) = error_norms(sys, &solution.u, &solution.p, exact)?;
    let (m1, m2) = (&sys.bodies[0].mesh, &sys.bodies[1].mesh);
    let quality = quality_report_pair(m1, m2);
    let sigma = recover_contact_pressure(sys, &solution.u, &solution.p, &problem.trace);
    let inner = &sigma[1..sigma.len() - 1];
    let result = LevelResult {
        cells,
        h: quality.h,
        ndof_u: sys.n_u,
        ndof_p: sys.n_p,
        delta_u,
        delta_p,
        iters: solution.iterations,
        log_factor: quality.log_factor,
        h_m: quality.h_m,
        contact_rows: problem.constraints.n_rows(),
        kkt: kkt_report(&solution.u, &solution.p, &solution.y, sys, &problem.constraints),
        pressure_relation: pressure_relation_residual(sys, &solution.u, &solution.p),
        mean_sigma_n: inner.iter().sum::<f64>() / inner.len().max(1) as f64,
    };
    Ok(LevelRun {
        result,
        meshes: (m1.clone(), m2.clone()),
        solution,
        problem,
    })
}

/// Least-squares slope of `log e` against `log h`; refuses fewer than three points.
pub fn fit_slope(h: &[f64], e: &[f64]) -> Result<f64> {
    if h.len() != e.len() {
        return Err(VemError::InvalidArgument("slope fit needs matching data".into()));
    }
    if h.len() < 3 {
        return Err(VemError::InvalidArgument(format!("refusing to fit a rate on {} levels", h.len())));
    }
    if h.iter().chain(e).any(|v| !(*v > 0.0)) {
        return Err(VemError::InvalidArgument("slope fit needs positive data".into()));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub outcome: std::result::Result<LevelResult, LevelFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelFailure {
    pub message: String,
    /// The Uzawa iteration hit its cap (as opposed to a setup error).
    pub non_convergence: bool,
}

impl From<VemError> for LevelFailure {
    fn from(e: VemError) -> Self {
        LevelFailure {
            non_convergence: matches!(e, VemError::NonConvergence { .. }),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub problem: String,
    pub family: Family,
    pub k: usize,
    pub lambda: f64,
    pub config: Configuration,
    /// Ordered by decreasing `h`.
    pub rows: Vec<ConvergenceRow>,
    pub slope_u: Option<f64>,
    pub slope_p: Option<f64>,
}

impl ConvergenceReport {
    pub fn results(&self) -> impl Iterator<Item = &LevelResult> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    /// CSV with columns `h,ndof_u,ndof_p,delta_u,delta_p,iters,log_factor`;
    /// failed levels are written as `nan`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,ndof_u,ndof_p,delta_u,delta_p,iters,log_factor\n");
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => writeln!(
                    s,
                    "{:e},{},{},{:e},{:e},{},{:e}",
                    r.h, r.ndof_u, r.ndof_p, r.delta_u, r.delta_p, r.iters, r.log_factor
                )
                .unwrap(),
                Err(_) => writeln!(s, "nan,nan,nan,nan,nan,nan,nan").unwrap(),
            }
        }
        s
    }
}

/// Runs `levels` in parallel (at most `settings.jobs` at a time) and collects the
/// results in level order; `on_level` sees each successful run.
pub fn run_levels<F>(
    exact: &ManufacturedSolution,
    family: Family,
    levels: &[usize],
    config: Configuration,
    settings: &StudySettings,
    on_level: F,
) -> Vec<ConvergenceRow>
where
    F: Fn(usize, &LevelRun) + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ConvergenceRow>>> = Mutex::new(vec![None; levels.len()]);
    std::thread::scope(|scope| {
        for _ in 0..settings.jobs.clamp(1, levels.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= levels.len() {
                    break;
                }
                let outcome = run_level(exact, family, levels[i], config, settings).map(|run| {
                    on_level(i, &run);
                    run.result
                });
                slots.lock().unwrap()[i] = Some(ConvergenceRow {
                    cells: levels[i],
                    outcome: outcome.map_err(LevelFailure::from),
                });
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every level ran")).collect()
}

pub fn run_convergence(
    exact: &ManufacturedSolution,
    family: Family,
    levels: &[usize],
    config: Configuration,
    settings: &StudySettings,
) -> ConvergenceReport {
    convergence_report(exact, family, config, settings, run_levels(exact, family, levels, config, settings, |_, _| {}))
}

/// Sorts rows by decreasing `h` and fits rates over the successful ones.
pub fn convergence_report(
    exact: &ManufacturedSolution,
    family: Family,
    config: Configuration,
    settings: &StudySettings,
    mut rows: Vec<ConvergenceRow>,
) -> ConvergenceReport {
    let key = |r: &ConvergenceRow| r.outcome.as_ref().map_or(f64::INFINITY, |x| x.h);
    rows.sort_by(|a, b| key(b).partial_cmp(&key(a)).unwrap());
    let ok: Vec<&LevelResult> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let used = if settings.skip_coarsest && !ok.is_empty() { &ok[1..] } else { &ok[..] };
    let h: Vec<f64> = used.iter().map(|r| r.h).collect();
    let du: Vec<f64> = used.iter().map(|r| r.delta_u).collect();
    let dp: Vec<f64> = used.iter().map(|r| r.delta_p).collect();
    ConvergenceReport {
        problem: exact.name.to_string(),
        family,
        k: settings.k,
        lambda: exact.material.lambda,
        config,
        slope_u: fit_slope(&h, &du).ok(),
        slope_p: fit_slope(&h, &dp).ok(),
        rows,
    }
}

#[cfg(test)]
mod tests;
