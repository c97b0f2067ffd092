//! Flags, config file and their validated merge.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vemcontact::bench::{Configuration, Family, HertzSpec};
use vemcontact::solver::{Step, UzawaConfig};
use vemcontact::vem::StabMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Patch,
    Trig,
    Hertz,
    /// Two user meshes from `.vemmesh` files with a manufactured solution.
    Custom,
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "patch" => Ok(Experiment::Patch),
            "trig" => Ok(Experiment::Trig),
            "hertz" => Ok(Experiment::Hertz),
            "custom" => Ok(Experiment::Custom),
            _ => Err(format!("unknown experiment `{s}` (expected patch, trig, hertz or custom)")),
        }
    }
}

/// Runs the contact benchmarks and writes their reports.
#[derive(Parser, Debug, Default)]
#[command(name = "vemcontact", version)]
pub struct Args {
    /// Flat TOML file with the same keys as the long flags; flags win.
    #[arg(long = "config-file", value_name = "PATH")]
    pub config_file: Option<PathBuf>,
    #[arg(long)]
    pub experiment: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub family: Option<String>,
    /// Cells per body, comma separated (disk cells for `hertz`).
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Contact-line configuration, IM or SE.
    #[arg(long)]
    pub config: Option<String>,
    /// `scaled` or `literal`.
    #[arg(long)]
    pub stab: Option<String>,
    /// Uzawa step, `auto` or a positive number.
    #[arg(long)]
    pub rho: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub maxit: Option<usize>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run the plain projected Uzawa iteration instead of the augmented one.
    #[arg(long)]
    pub plain_uzawa: bool,
    /// `custom` only: slave mesh below y = 0.
    #[arg(long)]
    pub lower_mesh: Option<PathBuf>,
    /// `custom` only: master mesh above y = 0.
    #[arg(long)]
    pub upper_mesh: Option<PathBuf>,
    /// `custom` only: `patch` or `trig` data.
    #[arg(long)]
    pub solution: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<String>,
    k: Option<usize>,
    family: Option<String>,
    levels: Option<Vec<usize>>,
    lambda: Option<Vec<f64>>,
    config: Option<String>,
    stab: Option<String>,
    rho: Option<toml::Value>,
    tol: Option<f64>,
    maxit: Option<usize>,
    jobs: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    plain_uzawa: Option<bool>,
    lower_mesh: Option<PathBuf>,
    upper_mesh: Option<PathBuf>,
    solution: Option<String>,
}

/// Fully resolved and validated run description.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub k: usize,
    pub family: Family,
    pub levels: Vec<usize>,
    pub lambda: Vec<f64>,
    pub config: Configuration,
    pub stab: StabMode,
    pub solver: UzawaConfig,
    pub seed: u64,
    pub solution: String,
    pub lower_mesh: Option<PathBuf>,
    pub upper_mesh: Option<PathBuf>,
    #[serde(skip)]
    pub jobs: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON of every field that affects results.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse<T: FromStr>(what: &str, s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("--{what}: {e}"))
}

fn read_file(path: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn resolve(args: Args) -> Result<ExperimentConfig, String> {
    let file = match &args.config_file {
        Some(p) => read_file(p)?,
        None => FileConfig::default(),
    };
    let rho_file = match file.rho {
        None => None,
        Some(toml::Value::String(s)) => Some(s),
        Some(toml::Value::Float(v)) => Some(v.to_string()),
        Some(toml::Value::Integer(v)) => Some(v.to_string()),
        Some(other) => return Err(format!("rho: expected `auto` or a number, got {other}")),
    };

    let experiment: Experiment = parse("experiment", &args.experiment.or(file.experiment).ok_or("--experiment is required")?)?;
    let k = args.k.or(file.k).unwrap_or(1);
    if !(1..=2).contains(&k) {
        return Err(format!("--k: order {k} is not supported (expected 1 or 2)"));
    }
    let family: Family = parse("family", &args.family.or(file.family).unwrap_or_else(|| "Q".into()))?;
    let config: Configuration = parse("config", &args.config.or(file.config).unwrap_or_else(|| "IM".into()))?;
    let stab: StabMode = parse("stab", &args.stab.or(file.stab).unwrap_or_else(|| "scaled".into()))?;
    let rho: Step = parse("rho", &args.rho.or(rho_file).unwrap_or_else(|| "auto".into()))?;
    let defaults = UzawaConfig::default();
    let solver = UzawaConfig {
        rho,
        tol: args.tol.or(file.tol).unwrap_or(defaults.tol),
        max_iter: args.maxit.or(file.maxit).unwrap_or(defaults.max_iter),
        augmented: !(args.plain_uzawa || file.plain_uzawa.unwrap_or(false)),
        record_history: true,
    };
    solver.validate().map_err(|e| e.to_string())?;
    let jobs = args.jobs.or(file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err("--jobs must be at least 1".into());
    }
    let seed = args.seed.or(file.seed).unwrap_or(1);
    let out = args.out.or(file.out).unwrap_or_else(|| PathBuf::from("out"));
    let solution = args.solution.or(file.solution).unwrap_or_else(|| "trig".into());
    let lower_mesh = args.lower_mesh.or(file.lower_mesh);
    let upper_mesh = args.upper_mesh.or(file.upper_mesh);
    let lambda_given = args.lambda.or(file.lambda);
    let levels_given = args.levels.or(file.levels);

    let (levels, lambda) = match experiment {
        Experiment::Patch | Experiment::Trig => {
            let levels = levels_given.unwrap_or_else(|| family.default_levels().to_vec());
            check_levels(family, &levels)?;
            (levels, lambda_given.unwrap_or_else(|| vec![10.0, 1e3, 1e8]))
        }
        Experiment::Hertz => {
            if lambda_given.is_some() {
                return Err("--lambda does not apply to hertz (materials are fixed by E and ν)".into());
            }
            HertzSpec::default().validate().map_err(|e| e.to_string())?;
            let levels = levels_given.unwrap_or_else(|| vec![256]);
            for &c in &levels {
                let n = (c as f64).sqrt().round() as usize;
                if n * n != c || n < 4 || n % 4 != 0 {
                    return Err(format!("--levels: disk cell count {c} must be n² with n a multiple of 4"));
                }
            }
            (levels, Vec::new())
        }
        Experiment::Custom => {
            if lower_mesh.is_none() || upper_mesh.is_none() {
                return Err("custom needs --lower-mesh and --upper-mesh".into());
            }
            if levels_given.is_some() {
                return Err("--levels does not apply to custom meshes".into());
            }
            (Vec::new(), lambda_given.unwrap_or_else(|| vec![10.0]))
        }
    };
    if levels.iter().any(|&c| c == 0) || (experiment != Experiment::Custom && levels.is_empty()) {
        return Err("--levels must list positive cell counts".into());
    }
    if lambda.iter().any(|l| !(*l > 0.0 && l.is_finite())) || (experiment != Experiment::Hertz && lambda.is_empty()) {
        return Err("--lambda must list positive finite values".into());
    }
    if !matches!(solution.as_str(), "patch" | "trig") {
        return Err(format!("--solution: unknown manufactured solution `{solution}` (expected patch or trig)"));
    }
    Ok(ExperimentConfig {
        experiment,
        k,
        family,
        levels,
        lambda,
        config,
        stab,
        solver,
        seed,
        solution,
        lower_mesh,
        upper_mesh,
        jobs,
        out,
    })
}

fn check_levels(family: Family, levels: &[usize]) -> Result<(), String> {
    for &c in levels {
        if family == Family::Q {
            let n = (c as f64).sqrt().round() as usize;
            if n * n != c {
                return Err(format!("--levels: square family needs perfect squares, got {c}"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Args {
        Args::try_parse_from(std::iter::once("vemcontact").chain(list.iter().copied())).unwrap()
    }

    #[test]
    fn defaults_and_lists() {
        let c = resolve(args(&["--experiment", "patch", "--levels", "4,16", "--lambda", "10,1e3,1e8"])).unwrap();
        assert_eq!(c.levels, [4, 16]);
        assert_eq!(c.lambda, [10.0, 1e3, 1e8]);
        assert_eq!((c.k, c.family, c.config), (1, Family::Q, Configuration::IM));
        assert!(c.solver.augmented);
    }

    #[test]
    fn invalid_enumerations_rejected() {
        assert!(resolve(args(&["--experiment", "trig", "--family", "X"])).is_err());
        assert!(resolve(args(&["--experiment", "nope"])).is_err());
        assert!(resolve(args(&["--experiment", "trig", "--k", "3"])).is_err());
        assert!(resolve(args(&["--experiment", "trig", "--levels", "5"])).is_err());
        assert!(resolve(args(&["--experiment", "hertz", "--levels", "100"])).is_err());
        assert!(resolve(args(&["--experiment", "trig", "--rho=-2"])).is_err());
        assert!(resolve(args(&["--experiment", "custom"])).is_err());
        assert!(resolve(args(&[])).is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "experiment = \"trig\"\nk = 2\nfamily = \"H\"\nrho = 3.5\nlevels = [4, 16, 64]\n").unwrap();
        let p = path.to_str().unwrap();
        let c = resolve(args(&["--config-file", p, "--family", "W", "--levels", "8,32,128"])).unwrap();
        assert_eq!((c.k, c.family), (2, Family::W));
        assert_eq!(c.solver.rho, Step::Fixed(3.5));
        assert_eq!(c.levels, [8, 32, 128]);
        std::fs::write(&path, "experimnet = \"trig\"\n").unwrap();
        assert!(resolve(args(&["--config-file", p])).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = resolve(args(&["--experiment", "trig", "--out", "a"])).unwrap();
        let b = resolve(args(&["--experiment", "trig", "--out", "b", "--jobs", "3"])).unwrap();
        let c = resolve(args(&["--experiment", "trig", "--seed", "2"])).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
