//! Experiment drivers. Each returns the complete set of output files in memory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use serde_json::json;

use vemcontact::bench::{
    convergence_report, patch_solution, run_hertz, run_levels, run_pair, trig_solution, ConvergenceReport, ConvergenceRow,
    HertzSpec, LevelFailure, LevelRun, ManufacturedSolution, StudySettings,
};
use vemcontact::mesh::{read_mesh, write_mesh, PolyMesh};
use vemcontact::VemError;

use crate::config::{Experiment, ExperimentConfig};

pub struct Artifacts {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    pub non_converged: bool,
    pub summary: Vec<String>,
}

/// Per-level files collected while the levels run.
#[derive(Default)]
struct LevelFiles {
    meshes: BTreeMap<usize, (String, String)>,
    history: BTreeMap<usize, String>,
}

fn solution(name: &str, lambda: f64) -> ManufacturedSolution {
    if name == "patch" {
        patch_solution(lambda)
    } else {
        trig_solution(lambda)
    }
}

fn study_settings(cfg: &ExperimentConfig) -> StudySettings {
    StudySettings {
        k: cfg.k,
        stab: cfg.stab,
        solver: cfg.solver,
        seed: cfg.seed,
        jobs: cfg.jobs,
        skip_coarsest: false,
    }
}

fn prefixed_history(label: &str, history_csv: &str, out: &mut String) {
    for line in history_csv.lines().skip(1) {
        writeln!(out, "{label},{line}").unwrap();
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts, String> {
    match cfg.experiment {
        Experiment::Patch | Experiment::Trig | Experiment::Custom => manufactured(cfg),
        Experiment::Hertz => hertz(cfg),
    }
}

fn load_pair(cfg: &ExperimentConfig) -> Result<(PolyMesh, PolyMesh), String> {
    let load = |path: &std::path::Path, body: u8| -> Result<PolyMesh, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mesh = read_mesh(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        mesh.check_labels().map_err(|e| format!("{}: {e}", path.display()))?;
        mesh.transformed(|p| *p, false, body).map_err(|e| e.to_string())
    };
    Ok((load(cfg.lower_mesh.as_ref().unwrap(), 1)?, load(cfg.upper_mesh.as_ref().unwrap(), 2)?))
}

fn manufactured(cfg: &ExperimentConfig) -> Result<Artifacts, String> {
    let settings = study_settings(cfg);
    let name = match cfg.experiment {
        Experiment::Patch => "patch",
        Experiment::Trig => "trig",
        _ => cfg.solution.as_str(),
    };
    let custom = if cfg.experiment == Experiment::Custom { Some(load_pair(cfg)?) } else { None };

    let files = Mutex::new(LevelFiles::default());
    let mut reports: Vec<ConvergenceReport> = Vec::new();
    let mut history = String::from("lambda,cells,iter,primal,dual,complementarity\n");
    for (li, &lambda) in cfg.lambda.iter().enumerate() {
        let exact = solution(name, lambda);
        let keep = |cells: usize, run: &LevelRun| {
            let mut f = files.lock().unwrap();
            if li == 0 {
                f.meshes.insert(cells, (write_mesh(&run.meshes.0), write_mesh(&run.meshes.1)));
            }
            f.history.insert(cells, run.solution.history_csv());
        };
        let rows = match &custom {
            Some((lower, upper)) => {
                let cells = upper.n_cells();
                let outcome = run_pair(&exact, lower, upper, cells, &settings).map(|run| {
                    keep(cells, &run);
                    run.result
                });
                vec![ConvergenceRow {
                    cells,
                    outcome: outcome.map_err(LevelFailure::from),
                }]
            }
            None => run_levels(&exact, cfg.family, &cfg.levels, cfg.config, &settings, |i, run| keep(cfg.levels[i], run)),
        };
        if let Some(f) = rows.iter().filter_map(|r| r.outcome.as_ref().err()).find(|f| !f.non_convergence) {
            return Err(f.message.clone());
        }
        let report = convergence_report(&exact, cfg.family, cfg.config, &settings, rows);
        let mut f = files.lock().unwrap();
        for row in &report.rows {
            if let Some(h) = f.history.remove(&row.cells) {
                prefixed_history(&format!("{lambda:e},{}", row.cells), &h, &mut history);
            }
        }
        reports.push(report);
    }

    let hash = cfg.hash();
    let mut csv = format!("# config_sha256 = {hash}\nlambda,");
    csv.push_str(&reports[0].to_csv().lines().next().unwrap().to_string());
    csv.push('\n');
    let mut summary = Vec::new();
    let mut non_converged = false;
    for r in &reports {
        for line in r.to_csv().lines().skip(1) {
            writeln!(csv, "{:e},{line}", r.lambda).unwrap();
        }
        let fails = r.rows.iter().filter(|row| row.outcome.is_err()).count();
        non_converged |= fails > 0;
        summary.push(format!(
            "{} k={} {} {} λ={:e}: slope δu {} δp {}{}",
            r.problem,
            r.k,
            r.family,
            r.config,
            r.lambda,
            fmt_slope(r.slope_u),
            fmt_slope(r.slope_p),
            if fails > 0 { format!(", {fails} level(s) did not converge") } else { String::new() }
        ));
    }
    let report_json = json!({ "config_sha256": hash, "config": cfg, "reports": reports });

    let mut out = vec![
        ("report.csv".to_string(), csv),
        ("report.json".to_string(), serde_json::to_string_pretty(&report_json).unwrap() + "\n"),
        ("iterations.csv".to_string(), format!("# config_sha256 = {hash}\n{history}")),
    ];
    for (cells, (lower, upper)) in files.into_inner().unwrap().meshes {
        out.push((format!("mesh_{cells}_lower.vemmesh"), lower));
        out.push((format!("mesh_{cells}_upper.vemmesh"), upper));
    }
    Ok(Artifacts {
        files: out,
        non_converged,
        summary,
    })
}

fn fmt_slope(s: Option<f64>) -> String {
    s.map_or_else(|| "n/a".into(), |v| format!("{v:.3}"))
}

fn hertz(cfg: &ExperimentConfig) -> Result<Artifacts, String> {
    let spec = HertzSpec::default();
    let hash = cfg.hash();
    let mut csv = format!("# config_sha256 = {hash}\ndisk_cells,ndof_u,ndof_p,p_max,p_max_reference,half_width,b,asymmetry,iters\n");
    let mut history = format!("# config_sha256 = {hash}\ndisk_cells,iter,primal,dual,complementarity\n");
    let mut runs = Vec::new();
    let mut meshes = Vec::new();
    let mut profile = None;
    let mut summary = Vec::new();
    let mut non_converged = false;
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    for &cells in &levels {
        match run_hertz(&spec, cells, cfg.k, cfg.stab, &cfg.solver) {
            Ok(run) => {
                writeln!(
                    csv,
                    "{},{},{},{:e},{:e},{:e},{:e},{:e},{}",
                    cells, run.ndof_u, run.ndof_p, run.p_max, run.reference.p_max, run.half_width, run.reference.b, run.asymmetry, run.iterations
                )
                .unwrap();
                prefixed_history(&cells.to_string(), &run.history_csv, &mut history);
                meshes.push((format!("mesh_{cells}_disk.vemmesh"), write_mesh(&run.meshes.0)));
                meshes.push((format!("mesh_{cells}_square.vemmesh"), write_mesh(&run.meshes.1)));
                summary.push(format!(
                    "hertz k={} {cells} cells: p_max {:.4} (reference {:.4}), half-width {:.4} (b = {:.4})",
                    cfg.k, run.p_max, run.reference.p_max, run.half_width, run.reference.b
                ));
                profile = Some(format!("# config_sha256 = {hash}\n{}", run.profile_csv()));
                runs.push(json!({ "disk_cells": cells, "run": run }));
            }
            Err(e @ VemError::NonConvergence { .. }) => {
                non_converged = true;
                writeln!(csv, "{cells},nan,nan,nan,nan,nan,nan,nan,nan").unwrap();
                summary.push(format!("hertz {cells} cells: {e}"));
                runs.push(json!({ "disk_cells": cells, "error": e.to_string() }));
            }
            Err(e) => return Err(e.to_string()),
        }
    }
    let report_json = json!({ "config_sha256": hash, "config": cfg, "spec": spec, "runs": runs });
    let mut files = vec![
        ("report.csv".to_string(), csv),
        ("report.json".to_string(), serde_json::to_string_pretty(&report_json).unwrap() + "\n"),
        ("iterations.csv".to_string(), history),
    ];
    if let Some(p) = profile {
        files.push(("pressure_profile.csv".to_string(), p));
    }
    files.extend(meshes);
    Ok(Artifacts {
        files,
        non_converged,
        summary,
    })
}
