//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! fails at the end if any criterion failed.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vemcontact::assembly::{apply_dirichlet, assemble, build_contact_constraints, BodyProblem, Material, ReducedSystem};
use vemcontact::assembly::CsrMatrix;
use vemcontact::bench::{run_hertz, HertzSpec};
use vemcontact::bench::{
    patch_solution, run_convergence, run_level, trig_solution, Configuration, ConvergenceReport, Family, StudySettings,
};
use vemcontact::contact::{insert_matching_nodes, ContactLine, GapFunction, TraceMode};
use vemcontact::mesh::{build_hexagonal_mesh, build_square_mesh, build_web_mesh, BoundaryLabel, CellGeometry, Point, PolyMesh, Rect};
use vemcontact::quadrature::polygon_rule;
use vemcontact::solver::{solve, UzawaConfig};
use vemcontact::vem::poly::{self, vector_basis, VecPoly};
use vemcontact::vem::{local_element, StabMode};

const LAMBDAS: [f64; 3] = [10.0, 1e3, 1e8];

struct Outcome {
    lines: Vec<String>,
    failed: usize,
}

impl Outcome {
    fn record(&mut self, id: &str, ok: bool, detail: String) {
        let line = format!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        println!("{line}");
        self.failed += (!ok) as usize;
        self.lines.push(line);
    }
}

fn settings(k: usize) -> StudySettings {
    StudySettings {
        k,
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..StudySettings::default()
    }
}

type StudyKey = (usize, Family, u64, Configuration);

/// Trig studies keyed by `(k, family, λ bits, configuration)`.
fn trig_studies() -> BTreeMap<StudyKey, ConvergenceReport> {
    let mut out = BTreeMap::new();
    for k in [1, 2] {
        for family in [Family::Q, Family::H, Family::W] {
            for lambda in LAMBDAS {
                for config in [Configuration::IM, Configuration::SE] {
                    let t = Instant::now();
                    let r = run_convergence(&trig_solution(lambda), family, &family.default_levels(), config, &settings(k));
                    let iters: Vec<usize> = r.results().map(|l| l.iters).collect();
                    println!(
                        "  trig k={k} {family} λ={lambda:e} {config}: slope_u={:?} slope_p={:?} iters={iters:?} ({:.1}s)",
                        r.slope_u,
                        r.slope_p,
                        t.elapsed().as_secs_f64()
                    );
                    out.insert((k, family, lambda.to_bits(), config), r);
                }
            }
        }
    }
    out
}

fn patch(o: &mut Outcome) {
    let mut worst = (0.0_f64, String::new());
    let mut errors = Vec::new();
    for k in [1, 2] {
        for (family, levels) in [(Family::Q, [4, 16]), (Family::H, [4, 16]), (Family::W, [8, 32])] {
            for config in [Configuration::IM, Configuration::SE] {
                for lambda in LAMBDAS {
                    for cells in levels {
                        match run_level(&patch_solution(lambda), family, cells, config, &settings(k)) {
                            Ok(run) => {
                                let d = run.result.delta_u.max(run.result.delta_p);
                                if d >= worst.0 {
                                    worst = (d, format!("k={k} {family}{cells} {config} λ={lambda:e}"));
                                }
                            }
                            Err(e) => errors.push(format!("k={k} {family}{cells} {config} λ={lambda:e}: {e}")),
                        }
                    }
                }
            }
        }
    }
    o.record(
        "1 (patch test)",
        errors.is_empty() && worst.0 <= 1e-7,
        format!("72 runs, max(δu, δp) = {:.2e} at {}; failures: {errors:?}", worst.0, worst.1),
    );
}

fn rates_k1(o: &mut Outcome, studies: &BTreeMap<StudyKey, ConvergenceReport>) {
    let mut ok = true;
    let mut parts = Vec::new();
    for family in [Family::Q, Family::H, Family::W] {
        for lambda in LAMBDAS {
            let r = &studies[&(1, family, lambda.to_bits(), Configuration::IM)];
            let (su, sp) = (r.slope_u.unwrap_or(f64::NAN), r.slope_p.unwrap_or(f64::NAN));
            ok &= (0.85..=1.3).contains(&su) && sp >= 0.85;
            parts.push(format!("{family}/{lambda:e}: u {su:.3} p {sp:.3}"));
        }
    }
    o.record("2 (trig k=1 rates)", ok, parts.join(", "));
}

fn rates_k2(o: &mut Outcome, studies: &BTreeMap<StudyKey, ConvergenceReport>) {
    let mut ok = true;
    let mut parts = Vec::new();
    for family in [Family::Q, Family::H] {
        for lambda in LAMBDAS {
            let r = &studies[&(2, family, lambda.to_bits(), Configuration::IM)];
            let su = r.slope_u.unwrap_or(f64::NAN);
            ok &= su >= 1.8;
            parts.push(format!("{family}/{lambda:e}: u {su:.3}"));
        }
    }
    let w: Vec<String> = LAMBDAS
        .iter()
        .map(|l| format!("{:.3}", studies[&(2, Family::W, l.to_bits(), Configuration::IM)].slope_u.unwrap_or(f64::NAN)))
        .collect();
    o.record("3 (trig k=2 rates)", ok, format!("{} (W, not required: {})", parts.join(", "), w.join(" ")));
}

fn locking(o: &mut Outcome, studies: &BTreeMap<StudyKey, ConvergenceReport>) {
    let at = |lambda: f64| {
        studies[&(2, Family::Q, lambda.to_bits(), Configuration::IM)]
            .results()
            .find(|l| l.cells == 64)
            .map(|l| (l.delta_u, l.iters))
    };
    let (lo, hi) = (at(10.0), at(1e8));
    let ok = matches!((lo, hi), (Some(a), Some(b)) if b.0 <= 3.0 * a.0);
    o.record("4 (λ-robustness)", ok, format!("Q64 k=2 (δu, iters): λ=10 {lo:?}, λ=1e8 {hi:?}"));
}

fn small_edges(o: &mut Outcome, studies: &BTreeMap<StudyKey, ConvergenceReport>) {
    let mut worst = (0.0_f64, String::new());
    let mut ok = true;
    for k in [1, 2] {
        for family in [Family::Q, Family::H, Family::W] {
            for lambda in LAMBDAS {
                let im = &studies[&(k, family, lambda.to_bits(), Configuration::IM)];
                let se = &studies[&(k, family, lambda.to_bits(), Configuration::SE)];
                for cells in family.default_levels() {
                    let a = im.results().find(|l| l.cells == cells);
                    let b = se.results().find(|l| l.cells == cells);
                    match (a, b) {
                        (Some(a), Some(b)) => {
                            let ratio = b.delta_u / a.delta_u;
                            if ratio >= worst.0 {
                                worst = (ratio, format!("k={k} {family}{cells} λ={lambda:e}"));
                            }
                            ok &= ratio <= 2.0;
                        }
                        _ => ok = false,
                    }
                }
            }
        }
    }
    o.record("5 (small edges)", ok, format!("max δu_SE/δu_IM = {:.3} at {}", worst.0, worst.1));
}

fn hertz(o: &mut Outcome) {
    let spec = HertzSpec::default();
    match run_hertz(&spec, 256, 2, StabMode::Scaled, &UzawaConfig::default()) {
        Ok(run) => {
            let r = run.reference;
            let pm = (run.p_max - 11.06).abs() <= 0.1 * 11.06;
            let hw = (run.half_width - r.b).abs() <= 0.2 * r.b;
            let tail = run
                .profile
                .iter()
                .filter(|p| p.x.abs() > 1.5 * r.b)
                .fold(0.0_f64, |a, p| a.max(p.sigma_n.abs()));
            let tl = tail <= 0.05 * run.p_max;
            o.record(
                "6 (Hertz)",
                pm && hw && tl,
                format!(
                    "p_max {:.4} (ref 11.06), half-width {:.4} (b {:.4}), tail max |σ_n| {:.4} (limit {:.4}), iters {}",
                    run.p_max,
                    run.half_width,
                    r.b,
                    tail,
                    0.05 * run.p_max,
                    run.iterations
                ),
            );
        }
        Err(e) => o.record("6 (Hertz)", false, format!("run failed: {e}")),
    }
}

/// 200 cells from every family plus one with a hanging node.
fn sample_cells() -> Vec<CellGeometry> {
    let r = Rect::new(0.0, 0.0, 1.0, 1.0);
    let meshes = [
        build_square_mesh(&r, 4).unwrap(),
        build_hexagonal_mesh(&r, 64).unwrap(),
        build_web_mesh(&r, 128, 3).unwrap(),
    ];
    let mut cells: Vec<CellGeometry> = meshes.iter().flat_map(|m| (0..m.n_cells()).map(|c| m.cell_geometry(c))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    while cells.len() > 199 {
        let i = rng.gen_range(0..cells.len());
        cells.swap_remove(i);
    }
    cells.push(CellGeometry::from_vertices(vec![
        Point::new(0.0, 0.0),
        Point::new(0.011, 0.0),
        Point::new(0.4, 0.0),
        Point::new(0.4, 0.3),
        Point::new(0.0, 0.3),
    ]));
    cells
}

fn random_poly(k: usize, rng: &mut ChaCha8Rng) -> VecPoly {
    let b = vector_basis(k);
    let c: Vec<f64> = (0..b.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    VecPoly::combine(&b, &c)
}

/// Worst (projector, k-consistency, kernel, divergence) defects over the sample.
fn element_defects() -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = [0.0_f64; 4];
    for (i, geom) in sample_cells().iter().enumerate() {
        for k in [1, 2] {
            let el = local_element(i, geom, k, 1.7, StabMode::Scaled).unwrap();
            let np = el.basis.len();
            for b in 0..np {
                let mut e = DVector::zeros(np);
                e[b] = 1.0;
                worst[0] = worst[0].max((&el.projector * el.dofs_of(&el.basis[b]) - e).norm());
            }
            for z in &el.basis {
                let zd = el.dofs_of(z);
                let v = DVector::from_fn(el.n_dofs(), |_, _| rng.gen_range(-1.0..1.0));
                let discrete = zd.dot(&(&el.stiffness * &v));
                let scale = el.stiffness.norm() * zd.norm() * v.norm();
                worst[1] = worst[1].max((discrete - el.energy_against_polynomial(z, &v)).abs() / scale);
            }
            if i % 5 == 0 {
                let eig = SymmetricEigen::new(el.stiffness.clone());
                let lmax = eig.eigenvalues.max();
                let zeros = eig.eigenvalues.iter().filter(|l| l.abs() <= 1e-10 * lmax).count();
                let negative = eig.eigenvalues.iter().any(|&l| l < -1e-10 * lmax);
                if zeros != 3 || negative {
                    worst[2] = f64::INFINITY;
                }
                for r in &el.basis[..3] {
                    let d = el.dofs_of(r);
                    worst[2] = worst[2].max((&el.stiffness * &d).norm() / (lmax * d.norm()));
                }
            }
            let rule = polygon_rule(geom, 6).unwrap();
            let q = poly::pressure_basis(k);
            let p = random_poly(k, &mut rng);
            let bd = &el.divergence * el.dofs_of(&p);
            let div = p.divergence(geom.diameter);
            for (j, qj) in q.iter().enumerate() {
                let oracle = rule.integrate(|x| {
                    let (xi, eta) = poly::scaled(geom, x);
                    poly::eval(&div, xi, eta) * poly::eval(qj, xi, eta)
                });
                worst[3] = worst[3].max((bd[j] - oracle).abs() / geom.area.max(1e-300));
            }
        }
    }
    worst
}

fn labelled(mesh: PolyMesh, outer_y: f64) -> PolyMesh {
    let mut m = mesh;
    m.label_boundary(|p, _| {
        Some(if p.y.abs() < 1e-12 {
            BoundaryLabel::Contact
        } else if (p.y - outer_y).abs() < 1e-12 {
            BoundaryLabel::Dirichlet
        } else {
            BoundaryLabel::Neumann
        })
    });
    m
}

fn dense_kkt(red: &ReducedSystem, g: &CsrMatrix, gap: &DVector<f64>, active: &[usize]) -> Option<DVector<f64>> {
    let (nf, np) = (red.n_free(), red.b.nrows);
    let n = nf + np + active.len();
    let mut m = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (i, j, v) in red.a.triplets() {
        m[(i, j)] += v;
    }
    for (i, j, v) in red.b.triplets() {
        m[(nf + i, j)] += v;
        m[(j, nf + i)] += v;
    }
    for (i, j, v) in red.c.triplets() {
        m[(nf + i, nf + j)] -= v;
    }
    for (a, &r) in active.iter().enumerate() {
        for (j, v) in g.row(r) {
            m[(nf + np + a, j)] += v;
            m[(j, nf + np + a)] += v;
        }
        rhs[nf + np + a] = gap[r];
    }
    rhs.rows_mut(0, nf).copy_from(&red.rhs_u);
    rhs.rows_mut(nf, np).copy_from(&red.rhs_p);
    m.lu().solve(&rhs)
}

/// Largest difference between Uzawa and the unique enumerated KKT point, both modes.
fn tiny_instance_defect() -> Result<f64, String> {
    let lower = build_square_mesh(&Rect::new(0.0, -1.0, 1.0, 0.0), 1).unwrap().transformed(|p| *p, false, 1).unwrap();
    let upper = build_square_mesh(&Rect::new(0.0, 0.0, 1.0, 1.0), 1).unwrap().transformed(|p| *p, false, 2).unwrap();
    let line = ContactLine::new(Point::new(0.0, 0.0), Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)).unwrap();
    let (a, b, trace) =
        insert_matching_nodes(&labelled(lower, -1.0), TraceMode::OnLine, &labelled(upper, 1.0), TraceMode::OnLine, &line).unwrap();
    let mat = Material::new(4.0, 1.0).unwrap();
    let mut top = BodyProblem::new(b, mat);
    top.dirichlet = Some(Arc::new(|x| Vector2::new(0.02 * x.x, -0.1)));
    let s = assemble(&[BodyProblem::new(a, mat), top], 1, StabMode::Scaled).unwrap();
    let gap = GapFunction::tabulated(vec![0.0, 1.0], vec![0.01, 0.25]).unwrap();
    let cc = build_contact_constraints(&s, &trace, &gap).unwrap();

    let red = apply_dirichlet(&s, &s.prescribed).unwrap();
    let rows: Vec<Option<usize>> = (0..cc.n_rows()).map(Some).collect();
    let g = cc.g.select(&rows, cc.n_rows(), &red.free_index, red.n_free());
    let gap_red = &cc.rhs - cc.g.mul_vec(&red.lifting);
    let (nf, np) = (red.n_free(), s.n_p);
    let mut found = Vec::new();
    for mask in 0u32..(1 << cc.n_rows()) {
        let active: Vec<usize> = (0..cc.n_rows()).filter(|r| mask & (1 << r) != 0).collect();
        let Some(x) = dense_kkt(&red, &g, &gap_red, &active) else { continue };
        let uf = x.rows(0, nf).into_owned();
        let w = g.mul_vec(&uf) - &gap_red;
        if (0..active.len()).all(|a| x[nf + np + a] >= -1e-12) && w.iter().all(|&v| v <= 1e-12) {
            let mut y = DVector::zeros(cc.n_rows());
            for (a, &r) in active.iter().enumerate() {
                y[r] = x[nf + np + a];
            }
            found.push((red.expand(&uf), x.rows(nf, np).into_owned(), y));
        }
    }
    if found.len() != 1 {
        return Err(format!("{} enumerated KKT points", found.len()));
    }
    let (u, p, y) = &found[0];
    let mut worst = 0.0_f64;
    for augmented in [true, false] {
        let sol = solve(&s, &cc, &UzawaConfig { augmented, ..UzawaConfig::default() }).map_err(|e| e.to_string())?;
        worst = worst.max((&sol.u - u).amax()).max((&sol.p - p).amax()).max((&sol.y - y).amax());
    }
    Ok(worst)
}

fn properties(o: &mut Outcome, studies: &BTreeMap<StudyKey, ConvergenceReport>) {
    let [proj, cons, kernel, div] = element_defects();
    o.record("7a (projector reproduction)", proj <= 1e-12, format!("max defect {proj:.2e} on 200 cells, k = 1, 2"));
    o.record("7b (k-consistency)", cons <= 1e-11, format!("max relative residual {cons:.2e}"));
    o.record("7c (rigid kernel)", kernel <= 1e-10, format!("3 zero eigenvalues, max rigid residual {kernel:.2e}"));
    o.record("7d (divergence exactness)", div <= 1e-12, format!("max defect {div:.2e}"));

    let tol = UzawaConfig::default().tol;
    let (mut kkt_ok, mut worst_kkt, mut worst_rel, mut runs) = (true, 0.0_f64, 0.0_f64, 0);
    for r in studies.values() {
        for l in r.results() {
            let k = &l.kkt;
            kkt_ok &= k.within(10.0 * tol);
            worst_kkt = worst_kkt.max(k.primal.max(k.dual).max(k.complementarity) / k.scale);
            worst_rel = worst_rel.max(l.pressure_relation);
            runs += 1;
        }
    }
    o.record("7e (KKT at convergence)", kkt_ok, format!("{runs} runs, max residual/scale {worst_kkt:.2e} (limit {:.0e})", 10.0 * tol));
    o.record("7f (pressure relation)", worst_rel <= 1e-10, format!("{runs} runs, max relative residual {worst_rel:.2e}"));
    match tiny_instance_defect() {
        Ok(d) => o.record("7g (tiny-instance oracle)", d <= 1e-10, format!("max deviation {d:.2e}, both Uzawa modes")),
        Err(e) => o.record("7g (tiny-instance oracle)", false, e),
    }
}

fn diagnostics(o: &mut Outcome, studies: &BTreeMap<StudyKey, ConvergenceReport>) {
    let mut ok = true;
    let mut min_gap = f64::INFINITY;
    for ((k, family, lambda, config), se) in studies {
        let header = se.to_csv().lines().next().unwrap_or_default().to_string();
        ok &= header.split(',').any(|c| c == "log_factor");
        ok &= se.to_csv().lines().skip(1).all(|l| l.rsplit(',').next().is_some_and(|v| v.parse::<f64>().is_ok_and(f64::is_finite)));
        if *config == Configuration::SE {
            let im = &studies[&(*k, *family, *lambda, Configuration::IM)];
            for l in se.results() {
                match im.results().find(|m| m.cells == l.cells) {
                    Some(m) => {
                        min_gap = min_gap.min(l.log_factor - m.log_factor);
                        ok &= l.log_factor > m.log_factor;
                    }
                    None => ok = false,
                }
            }
        }
    }
    o.record("8 (mesh diagnostics)", ok, format!("log_factor column in every CSV, min (SE - IM) = {min_gap:.3}"));
}

#[test]
fn acceptance() {
    let mut o = Outcome { lines: Vec::new(), failed: 0 };
    let t = Instant::now();
    patch(&mut o);
    println!("  ({:.1}s)", t.elapsed().as_secs_f64());
    let studies = trig_studies();
    rates_k1(&mut o, &studies);
    rates_k2(&mut o, &studies);
    locking(&mut o, &studies);
    small_edges(&mut o, &studies);
    let t = Instant::now();
    hertz(&mut o);
    println!("  ({:.1}s)", t.elapsed().as_secs_f64());
    properties(&mut o, &studies);
    diagnostics(&mut o, &studies);
    println!("summary:");
    for l in &o.lines {
        println!("{l}");
    }
    assert_eq!(o.failed, 0, "{} acceptance criteria failed", o.failed);
}
