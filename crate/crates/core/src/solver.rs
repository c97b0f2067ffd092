//! Uzawa iteration for the discrete contact inequality with a factorize-once
//! inner saddle solve.
//!
//! The default is the augmented-Lagrangian variant: the inner matrix carries
//! `r GᵀG` and a slack `s <= 0` splits `Gu - g = s`; `r` starts from the step and
//! is rescaled (with a refactorization) while the two residuals stay unbalanced.
//! With `augmented = false` the classical projected ascent
//! `y <- max(0, y + ρ(Gu - g))` is run on the unmodified saddle matrix.

use std::fmt::Write as _;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::assembly::{apply_dirichlet, ContactConstraints, CsrMatrix, GlobalSystem, ReducedSystem};
use crate::error::{Result, VemError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Step {
    /// Ten times the mean diagonal of the reduced displacement block.
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for Step {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Step::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|r| *r > 0.0 && r.is_finite())
            .map(Step::Fixed)
            .ok_or_else(|| VemError::InvalidArgument(format!("step `{s}` must be `auto` or a positive number")))
    }
}

/// Residual ratio that triggers a change of the augmentation parameter.
const BALANCE: f64 = 10.0;
/// Consecutive imbalanced iterations before rescaling.
const BALANCE_WINDOW: i32 = 10;
const RESCALE: f64 = 4.0;
const MAX_RESCALES: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UzawaConfig {
    pub rho: Step,
    pub tol: f64,
    pub max_iter: usize,
    pub augmented: bool,
    pub record_history: bool,
}

impl Default for UzawaConfig {
    fn default() -> Self {
        UzawaConfig {
            rho: Step::Auto,
            tol: 1e-12,
            max_iter: 100_000,
            augmented: true,
            record_history: false,
        }
    }
}

impl UzawaConfig {
    pub fn validate(&self) -> Result<()> {
        if let Step::Fixed(r) = self.rho {
            if !(r > 0.0 && r.is_finite()) {
                return Err(VemError::InvalidArgument(format!("step {r} must be positive")));
            }
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(VemError::InvalidArgument(format!("tolerance {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(VemError::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// KKT residuals of an iterate, all non-negative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `max(0, max_r (Gu - g)_r)`.
    pub primal: f64,
    /// `max(0, -min_r y_r)`.
    pub dual: f64,
    /// `|yᵀ(Gu - g)|`.
    pub complementarity: f64,
    pub energy: f64,
    /// `max(1, ‖u‖)·max(1, ‖y‖)`; residuals are judged relative to this.
    pub scale: f64,
}

impl KktReport {
    pub fn within(&self, tol: f64) -> bool {
        let t = tol * self.scale;
        self.primal <= t && self.dual <= t && self.complementarity <= t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

#[derive(Clone, Debug)]
pub struct ContactSolution {
    pub u: DVector<f64>,
    pub p: DVector<f64>,
    /// One multiplier per constraint row: a nodal force for vertex rows; for edge
    /// rows `y / |e|` is the mean normal traction.
    pub y: DVector<f64>,
    pub iterations: usize,
    pub inner_solves: usize,
    /// Final step or augmentation parameter (after any halving or rescaling).
    pub rho: f64,
    pub history: Vec<IterationRecord>,
    pub kkt: KktReport,
}

impl ContactSolution {
    /// Iteration log as CSV with columns `iter,primal,dual,complementarity`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,primal,dual,complementarity\n");
        for r in &self.history {
            writeln!(s, "{},{:e},{:e},{:e}", r.iter, r.primal, r.dual, r.complementarity).unwrap();
        }
        s
    }
}

pub fn kkt_report(u: &DVector<f64>, p: &DVector<f64>, y: &DVector<f64>, system: &GlobalSystem, cc: &ContactConstraints) -> KktReport {
    let w = cc.g.mul_vec(u) - &cc.rhs;
    let primal = w.iter().fold(0.0_f64, |m, &v| m.max(v));
    let dual = y.iter().fold(0.0_f64, |m, &v| m.max(-v));
    KktReport {
        primal,
        dual,
        complementarity: y.dot(&w).abs(),
        energy: system.energy(u, p),
        scale: u.norm().max(1.0) * y.norm().max(1.0),
    }
}

/// LU of the inner saddle matrix with one step of iterative refinement per solve.
struct InnerSolver {
    matrix: CsrMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl InnerSolver {
    fn new(matrix: CsrMatrix) -> Result<Self> {
        let n = matrix.nrows;
        let trip: Vec<Triplet<usize, usize, f64>> = matrix.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let sp = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| VemError::Setup(format!("sparse matrix: {e:?}")))?;
        let lu = sp.sp_lu().map_err(|e| VemError::Setup(format!("factorization failed: {e:?}")))?;
        let solver = InnerSolver { matrix, lu };
        // A singular matrix may still factor with a round-off pivot; a probe solve
        // exposes it through non-finite values or a condition lower bound near 1/eps.
        let probe = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i + 1) as f64).sin());
        let x = solver.solve(&probe);
        let growth = solver.matrix.max_abs() * x.amax() / probe.amax();
        let res = solver.relative_residual(&x, &probe);
        if !x.iter().all(|v| v.is_finite()) || !(growth <= 1e14) || !(res <= 1e-8) {
            return Err(VemError::Setup(format!(
                "singular saddle matrix (condition bound {growth:e}, relative residual {res:e})"
            )));
        }
        Ok(solver)
    }

    fn raw(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut m = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(m.as_mut());
        DVector::from_fn(b.len(), |i, _| m[(i, 0)])
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let x = self.raw(b);
        let r = b - self.matrix.mul_vec(&x);
        x + self.raw(&r)
    }

    fn relative_residual(&self, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (b - self.matrix.mul_vec(x)).norm() / (self.matrix.max_abs() * x.norm() + b.norm()).max(f64::MIN_POSITIVE)
    }
}

fn saddle_matrix(red: &ReducedSystem, g: &CsrMatrix, r: f64) -> CsrMatrix {
    let (nf, np) = (red.n_free(), red.b.nrows);
    let mut t: Vec<(usize, usize, f64)> = red.a.triplets().collect();
    if r > 0.0 {
        for i in 0..g.nrows {
            let row: Vec<(usize, f64)> = g.row(i).collect();
            for &(a, va) in &row {
                for &(b, vb) in &row {
                    t.push((a, b, r * va * vb));
                }
            }
        }
    }
    for (i, j, v) in red.b.triplets() {
        t.push((nf + i, j, v));
        t.push((j, nf + i, v));
    }
    t.extend(red.c.triplets().map(|(i, j, v)| (nf + i, nf + j, -v)));
    CsrMatrix::from_triplets(nf + np, nf + np, t)
}

pub fn solve(system: &GlobalSystem, cc: &ContactConstraints, cfg: &UzawaConfig) -> Result<ContactSolution> {
    cfg.validate()?;
    if cc.g.ncols != system.n_u || cc.rhs.len() != cc.g.nrows {
        return Err(VemError::InvalidArgument("constraint rows do not match the system".into()));
    }
    let red = apply_dirichlet(system, &system.prescribed)?;
    let (nf, np, m) = (red.n_free(), system.n_p, cc.n_rows());
    let all_rows: Vec<Option<usize>> = (0..m).map(Some).collect();
    let g = cc.g.select(&all_rows, m, &red.free_index, nf);
    let gap = &cc.rhs - cc.g.mul_vec(&red.lifting);

    let rho = match cfg.rho {
        Step::Fixed(r) => r,
        Step::Auto if nf > 0 => 10.0 * red.a.diagonal().iter().sum::<f64>() / nf as f64,
        Step::Auto => 1.0,
    };
    let mut r_aug = if cfg.augmented && m > 0 { rho } else { 0.0 };
    let mut inner = InnerSolver::new(saddle_matrix(&red, &g, r_aug))?;

    let mut rhs = DVector::zeros(nf + np);
    rhs.rows_mut(nf, np).copy_from(&red.rhs_p);
    let mut inner_solves = 0;
    let mut run = |inner: &InnerSolver, r: f64, y: &DVector<f64>, shift: &DVector<f64>| -> DVector<f64> {
        let mut bu = &red.rhs_u - g.tr_mul_vec(y);
        if r > 0.0 {
            bu += g.tr_mul_vec(shift) * r;
        }
        rhs.rows_mut(0, nf).copy_from(&bu);
        inner_solves += 1;
        inner.solve(&rhs)
    };

    let mut y = DVector::zeros(m);
    let mut slack = DVector::zeros(m);
    let mut x = run(&inner, r_aug, &y, &(&gap + &slack));
    if !x.iter().all(|v| v.is_finite()) {
        return Err(VemError::Setup("inner solve produced non-finite values".into()));
    }
    let unpack = |x: &DVector<f64>| (red.expand(&x.rows(0, nf).into_owned()), x.rows(nf, np).into_owned());

    let mut history = Vec::new();
    let mut step = rho;
    let mut iterations = 0;
    if m > 0 {
        let mut prev_dy: Option<DVector<f64>> = None;
        let mut flips_in_a_row = 0;
        let mut imbalance = 0_i32;
        let mut rescales = 0;
        let mut converged = false;
        while iterations < cfg.max_iter {
            iterations += 1;
            let uf = x.rows(0, nf).into_owned();
            let w = g.mul_vec(&uf) - &gap;
            let (y_new, ds_norm) = if r_aug > 0.0 {
                let s_new = (&w + &y / r_aug).map(|v| v.min(0.0));
                let ds = (&s_new - &slack).norm();
                slack = s_new;
                ((&y + &w * r_aug).map(|v| v.max(0.0)), ds)
            } else {
                ((&y + &w * step).map(|v| v.max(0.0)), 0.0)
            };
            let dy = &y_new - &y;
            if r_aug == 0.0 {
                if let Some(prev) = &prev_dy {
                    let active: Vec<usize> = (0..m).filter(|&i| y_new[i] > 0.0 || y[i] > 0.0).collect();
                    let flips = active.iter().filter(|&&i| dy[i] * prev[i] < 0.0).count();
                    flips_in_a_row = if !active.is_empty() && 2 * flips > active.len() { flips_in_a_row + 1 } else { 0 };
                    if flips_in_a_row >= 5 {
                        step *= 0.5;
                        flips_in_a_row = 0;
                    }
                }
                prev_dy = Some(dy.clone());
            }
            let primal = w.iter().fold(0.0_f64, |a, &v| a.max(v));
            if cfg.record_history {
                history.push(IterationRecord {
                    iter: iterations,
                    primal,
                    dual: y.iter().fold(0.0_f64, |a, &v| a.max(-v)),
                    complementarity: y.dot(&w).abs(),
                });
            }
            let (u_full, _) = unpack(&x);
            let y_scale = y_new.norm().max(1.0);
            let (res_p, res_d) = (dy.norm(), r_aug * ds_norm);
            let done = res_p <= cfg.tol * y_scale && primal <= cfg.tol * u_full.norm() && res_d <= cfg.tol * y_scale;
            y = y_new;
            if done {
                converged = true;
                break;
            }
            if r_aug > 0.0 && rescales < MAX_RESCALES {
                // residual balancing: r too large stalls the slack, too small stalls y
                imbalance = match (res_d > BALANCE * res_p, res_p > BALANCE * res_d) {
                    (true, _) => imbalance.min(0) - 1,
                    (_, true) => imbalance.max(0) + 1,
                    _ => 0,
                };
                if imbalance.abs() >= BALANCE_WINDOW {
                    r_aug = if imbalance > 0 { r_aug * RESCALE } else { r_aug / RESCALE };
                    inner = InnerSolver::new(saddle_matrix(&red, &g, r_aug))?;
                    imbalance = 0;
                    rescales += 1;
                }
            }
            x = run(&inner, r_aug, &y, &(&gap + &slack));
        }
        if !converged {
            let (u, p) = unpack(&x);
            let k = kkt_report(&u, &p, &y, system, cc);
            return Err(VemError::NonConvergence {
                iterations,
                primal: k.primal,
                dual: k.dual,
                complementarity: k.complementarity,
            });
        }
        if r_aug > 0.0 {
            step = r_aug;
        }
    }
    let (u, p) = unpack(&x);
    let kkt = kkt_report(&u, &p, &y, system, cc);
    Ok(ContactSolution {
        u,
        p,
        y,
        iterations,
        inner_solves,
        rho: step,
        history,
        kkt,
    })
}
