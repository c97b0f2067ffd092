use std::f64::consts::PI;

use super::*;
use crate::quadrature::edge_rule;

#[test]
fn patch_closed_forms() {
    let s = patch_solution(10.0);
    let x = Point::new(0.3, -0.4);
    assert_eq!(s.u(&x), Vector2::new(0.0, -0.06));
    assert!((s.divergence(&x) + 0.1).abs() < 1e-16);
    assert!((s.pressure(&x) + 1.0).abs() < 1e-15);
    assert_eq!(s.force(&x), Vector2::zeros());
    // traction on x = 0 and σ_n on y = 0
    assert!((s.traction(&x, &Vector2::new(-1.0, 0.0)) - Vector2::new(1.0, 0.0)).norm() < 1e-15);
    assert!((s.stress(&x)[(1, 1)] - (-1.0 - 0.2)).abs() < 1e-15);
}

#[test]
fn trig_closed_forms() {
    let s = trig_solution(1e3);
    let f = s.force(&Point::new(0.5, 0.0));
    assert!((f - Vector2::new(PI.powi(3) * 0.5, 0.0)).norm() < 1e-14);
    for x in [Point::new(0.2, 0.7), Point::new(0.9, -0.3)] {
        assert!(s.divergence(&x).abs() < 1e-14);
        assert_eq!(s.pressure(&x), 0.0);
    }
    assert!((s.stress(&Point::new(0.4, 0.0))[(1, 1)] + 2.0 * PI).abs() < 1e-14);
    assert_eq!(s.u(&Point::new(0.7, 0.0)).y, 0.0);
}

#[test]
fn manufactured_data_agree_with_numerical_differentiation() {
    for s in [patch_solution(10.0), patch_solution(1e8), trig_solution(10.0), trig_solution(1e8)] {
        let d = s.consistency_defect(20, 11);
        assert!(d <= 1e-6, "{}: {d}", s.name);
    }
}

#[test]
fn hertz_closed_forms() {
    let spec = HertzSpec::default();
    let r = hertz_reference(&spec);
    assert!((r.e_star - 76.86).abs() < 0.01, "{}", r.e_star);
    assert!((r.b - 0.1439).abs() < 1e-4, "{}", r.b);
    assert!((r.p_max - 11.06).abs() < 0.01, "{}", r.p_max);
    assert_eq!(r.pressure_at(&spec, r.b), 0.0);
    assert_eq!(r.pressure_at(&spec, -r.b), 0.0);
    let peak = r.pressure_at(&spec, 0.0) * PI * r.b / (4.0 * spec.radius * spec.pressure);
    assert!((peak - 1.0).abs() <= 1e-15);
    // ∫ p_n dx with x = b sin θ
    let rule = edge_rule(20);
    let total = rule.integrate(|t| {
        let th = PI * (t - 0.5);
        r.pressure_at(&spec, r.b * th.sin()) * r.b * th.cos() * PI
    });
    assert!((total - 2.0 * spec.radius * spec.pressure).abs() <= 1e-12, "{total}");
}

#[test]
fn slope_fit() {
    let h = [0.5, 0.25, 0.125, 0.0625];
    let e: Vec<f64> = h.iter().map(|v| 3.0 * v * v).collect();
    assert!((fit_slope(&h, &e).unwrap() - 2.0).abs() < 1e-13);
    assert!(fit_slope(&h[..2], &e[..2]).is_err());
    assert!(fit_slope(&h, &[1.0, 0.0, 1.0, 1.0]).is_err());
}

#[test]
fn parsing() {
    assert_eq!("Q".parse::<Family>().unwrap(), Family::Q);
    assert!("X".parse::<Family>().is_err());
    assert_eq!("I.M.".parse::<Configuration>().unwrap(), Configuration::IM);
    assert_eq!("se".parse::<Configuration>().unwrap(), Configuration::SE);
    assert_eq!(Family::W.default_levels(), [8, 32, 128, 512]);
}

#[test]
fn interpolant_of_patch_has_zero_error() {
    for k in [1, 2] {
        let exact = patch_solution(1e3);
        let (lower, upper) = square_pair(Family::H, 16, Configuration::SE, 4).unwrap();
        let pp = pair_problem(&lower, &upper, &exact, k, StabMode::Scaled).unwrap();
        let s = &pp.system;
        let mut u = DVector::zeros(s.n_u);
        let mut p = DVector::zeros(s.n_p);
        for b in 0..2 {
            s.interpolate_body(b, |x| exact.u(x), |x| exact.divergence(x), &mut u).unwrap();
            s.project_pressure_body(b, |x| exact.pressure(x), &mut p).unwrap();
        }
        let (du, dp) = error_norms(s, &u, &p, &exact).unwrap();
        assert!(du <= 1e-10 && dp <= 1e-10, "k = {k}: {du} {dp}");
    }
}

#[test]
fn small_patch_run_is_exact() {
    let settings = StudySettings { k: 1, ..StudySettings::default() };
    let exact = patch_solution(10.0);
    let run = run_level(&exact, Family::Q, 4, Configuration::IM, &settings).unwrap();
    let r = &run.result;
    assert!(r.delta_u <= 1e-8 && r.delta_p <= 1e-8, "{r:?}");
    let sigma = recover_contact_pressure(&run.problem.system, &run.solution.u, &run.solution.p, &run.problem.trace);
    for s in sigma {
        assert!((s - (-1.2)).abs() <= 1e-8, "{s}");
    }
    assert!(r.kkt.within(10.0 * settings.solver.tol));
}

#[test]
fn trig_contact_stress_is_recovered() {
    let settings = StudySettings { k: 2, ..StudySettings::default() };
    let run = run_level(&trig_solution(10.0), Family::Q, 64, Configuration::IM, &settings).unwrap();
    let sigma = recover_contact_pressure(&run.problem.system, &run.solution.u, &run.solution.p, &run.problem.trace);
    for s in &sigma[1..sigma.len() - 1] {
        assert!((s + 2.0 * PI).abs() <= 0.2 * PI, "{s}");
    }
    // edge multipliers over |e| are mean tractions
    let cc = &run.problem.constraints;
    for (r, kind) in cc.kinds.iter().enumerate() {
        if let crate::assembly::RowKind::EdgeMean(_) = kind {
            let t = run.solution.y[r] / cc.row_scale[r];
            assert!((t - 2.0 * PI).abs() <= 0.1 * 2.0 * PI, "{t}");
        }
    }
}

#[test]
fn small_edges_raise_the_log_factor() {
    let (a, b) = square_pair(Family::Q, 16, Configuration::IM, 2).unwrap();
    let (c, d) = square_pair(Family::Q, 16, Configuration::SE, 2).unwrap();
    let line = contact_line();
    let (a, b, _) = insert_matching_nodes(&a, TraceMode::OnLine, &b, TraceMode::OnLine, &line).unwrap();
    let (c, d, tr) = insert_matching_nodes(&c, TraceMode::OnLine, &d, TraceMode::OnLine, &line).unwrap();
    let im = quality_report_pair(&a, &b);
    let se = quality_report_pair(&c, &d);
    assert!(se.log_factor > im.log_factor);
    let h = c.max_diameter().max(d.max_diameter());
    assert!((0..tr.n_edges()).any(|l| tr.edge_length(l) <= 0.02 * h * (1.0 + 1e-9)));
}

#[test]
fn levels_run_in_parallel_deterministically() {
    let exact = trig_solution(10.0);
    let one = StudySettings { jobs: 1, ..StudySettings::default() };
    let three = StudySettings { jobs: 3, ..StudySettings::default() };
    let a = run_convergence(&exact, Family::W, &[8, 32, 128], Configuration::SE, &one);
    let b = run_convergence(&exact, Family::W, &[32, 8, 128], Configuration::SE, &three);
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.slope_u.is_some());
    let two = run_convergence(&exact, Family::W, &[8, 32], Configuration::SE, &one);
    assert!(two.slope_u.is_none());
}
