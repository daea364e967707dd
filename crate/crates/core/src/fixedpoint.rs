//! The truncated solution operator `T` and its damped iteration.
//!
//! `T(z₁, z₂) = (u₁, u₂)` where `u_i` solves `-Δ_{p_i} u_i = f_i(z̃₁, z̃₂,
//! |∇z̃₁|, |∇z̃₂|)` with `z̃_i` the truncation of `z_i` to the barrier rectangle.
//! Gradient magnitudes at nodes are the means of the adjacent cell gradients.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::barriers::BarrierPair;
use crate::domain::{fmt_f64, nodal_gradient_magnitude, norms, Field};
use crate::error::{invalid, Result};
use crate::plap::{self, PlapProblem, Rhs};
use crate::systems::{eval_f, truncate, ExponentConfig};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const ANDERSON_WINDOW: usize = 3;
/// Number of increments inspected for stagnation.
const STAGNATION_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Lower,
    Upper,
    Midpoint,
}

impl std::str::FromStr for Initial {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lower" => Ok(Initial::Lower),
            "upper" => Ok(Initial::Upper),
            "midpoint" => Ok(Initial::Midpoint),
            other => Err(format!("unknown initial guess '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateOptions {
    pub initial: Initial,
    pub relaxation: f64,
    pub max_iter: usize,
    /// Bound on the relative L² increment.
    pub tol: f64,
    /// Bound on the weak residuals required for `converged`.
    pub residual_tol: f64,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions {
            initial: Initial::Midpoint,
            relaxation: 1.0,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }
}

/// Nodal right-hand sides `f̃_i(z)`; Dirichlet entries are zero.
pub fn truncated_rhs(config: &ExponentConfig, barriers: &BarrierPair, z1: &Field, z2: &Field) -> Result<[Field; 2]> {
    let t1 = truncate(z1, &barriers.lower[0], &barriers.upper[0])?;
    let t2 = truncate(z2, &barriers.lower[1], &barriers.upper[1])?;
    assemble_rhs(config, &t1, &t2)
}

/// Nodal `f_i(u₁, u₂, |∇u₁|, |∇u₂|)` without truncation.
pub(crate) fn assemble_rhs(config: &ExponentConfig, u1: &Field, u2: &Field) -> Result<[Field; 2]> {
    u1.check_same_grid(u2)?;
    let grid = u1.grid();
    let g1 = nodal_gradient_magnitude(u1);
    let g2 = nodal_gradient_magnitude(u2);
    let mut f = [vec![0.0; grid.n_nodes()], vec![0.0; grid.n_nodes()]];
    for j in grid.free_nodes() {
        let d = grid.distance(grid.nodes()[j]);
        let (a, b) = eval_f(config, d, u1.values()[j], u2.values()[j], g1[j], g2[j])?;
        f[0][j] = a;
        f[1][j] = b;
    }
    let [f1, f2] = f;
    Ok([Field::new(grid.clone(), f1, true)?, Field::new(grid.clone(), f2, true)?])
}

fn problem(config: &ExponentConfig, i: usize, rhs: Field) -> Result<PlapProblem> {
    PlapProblem::new(rhs.grid().clone(), config.p[i], Rhs::Nodal(rhs))
}

/// One application of `T`. The two scalar solves are independent and run
/// concurrently.
pub fn apply_t(config: &ExponentConfig, barriers: &BarrierPair, z1: &Field, z2: &Field) -> Result<(Field, Field)> {
    let [f1, f2] = truncated_rhs(config, barriers, z1, z2)?;
    let p1 = problem(config, 0, f1)?;
    let p2 = problem(config, 1, f2)?;
    let (u1, u2) = rayon::join(|| plap::solve(&p1), || plap::solve(&p2));
    Ok((u1?.u, u2?.u))
}

/// Weak residuals of `(u₁, u₂)` for the truncated system.
pub fn truncated_residuals(config: &ExponentConfig, barriers: &BarrierPair, u1: &Field, u2: &Field) -> Result<[f64; 2]> {
    let [f1, f2] = truncated_rhs(config, barriers, u1, u2)?;
    let r1 = plap::weak_residual(&problem(config, 0, f1)?, u1)?;
    let r2 = plap::weak_residual(&problem(config, 1, f2)?, u2)?;
    Ok([r1, r2])
}

/// `max_i max_j max(lower_i - u_i, u_i - upper_i, 0)`.
pub fn rectangle_excess(barriers: &BarrierPair, u: [&Field; 2]) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..2 {
        let l = barriers.lower[i].values();
        let h = barriers.upper[i].values();
        for (j, v) in u[i].values().iter().enumerate() {
            worst = worst.max(l[j] - v).max(v - h[j]);
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub increment: f64,
    pub lp_grad: [f64; 2],
    pub sup_grad: [f64; 2],
    pub residual: [f64; 2],
    /// Energies of `T(z^k)` for the frozen right-hand sides.
    pub energy: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_increment: f64,
    pub weak_residuals: [f64; 2],
    pub localization_violation: f64,
    pub apriori_max_lp_grad: [f64; 2],
    pub apriori_max_sup_grad: [f64; 2],
    pub fields: [Field; 2],
    pub history: Vec<IterationRecord>,
    /// Relaxation in force at the end.
    pub relaxation: f64,
    pub anderson: bool,
}

impl SolveReport {
    /// One row per iteration.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "k,increment,lp_grad1,lp_grad2,sup_grad1,sup_grad2,residual1,residual2,energy1,energy2\n",
        );
        for r in &self.history {
            let cols = [
                r.increment,
                r.lp_grad[0],
                r.lp_grad[1],
                r.sup_grad[0],
                r.sup_grad[1],
                r.residual[0],
                r.residual[1],
                r.energy[0],
                r.energy[1],
            ];
            let _ = write!(s, "{}", r.k);
            for c in cols {
                let _ = write!(s, ",{}", fmt_f64(c));
            }
            s.push('\n');
        }
        s
    }

    /// `key = value` summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "converged = {}", self.converged);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "final_increment = {}", fmt_f64(self.final_increment));
        for i in 0..2 {
            let _ = writeln!(s, "weak_residual{} = {}", i + 1, fmt_f64(self.weak_residuals[i]));
        }
        let _ = writeln!(s, "localization_violation = {}", fmt_f64(self.localization_violation));
        for i in 0..2 {
            let _ = writeln!(s, "apriori_max_lp_grad{} = {}", i + 1, fmt_f64(self.apriori_max_lp_grad[i]));
            let _ = writeln!(s, "apriori_max_sup_grad{} = {}", i + 1, fmt_f64(self.apriori_max_sup_grad[i]));
        }
        let _ = writeln!(s, "relaxation = {}", fmt_f64(self.relaxation));
        let _ = writeln!(s, "anderson = {}", self.anderson);
        s
    }
}

fn rel_l2(new: &Field, old: &Field) -> f64 {
    let grid = new.grid();
    let mass = grid.hat_masses();
    let mut diff = 0.0;
    let mut base = 0.0;
    for j in 0..grid.n_nodes() {
        let (a, b) = (new.values()[j], old.values()[j]);
        diff += mass[j] * (a - b) * (a - b);
        base += mass[j] * a * a;
    }
    if base == 0.0 {
        diff.sqrt()
    } else {
        (diff / base).sqrt()
    }
}

/// Type-II Anderson mixing on the stacked free values of both components.
struct Anderson {
    window: usize,
    beta: f64,
    prev: Option<(DVector<f64>, DVector<f64>)>,
    dx: Vec<DVector<f64>>,
    df: Vec<DVector<f64>>,
}

impl Anderson {
    fn new(window: usize, beta: f64) -> Anderson {
        Anderson { window, beta, prev: None, dx: Vec::new(), df: Vec::new() }
    }

    /// Next iterate from `x` and `g = T(x)`.
    fn step(&mut self, x: DVector<f64>, g: DVector<f64>) -> DVector<f64> {
        let f = &g - &x;
        if let Some((px, pf)) = self.prev.take() {
            self.dx.push(&x - px);
            self.df.push(&f - pf);
            if self.dx.len() > self.window {
                self.dx.remove(0);
                self.df.remove(0);
            }
        }
        let mut next = &x + self.beta * &f;
        if !self.df.is_empty() {
            let m = self.df.len();
            let df = DMatrix::from_columns(&self.df);
            if let Ok(gamma) = df.clone().svd(true, true).solve(&f, 1e-12) {
                for k in 0..m {
                    next -= gamma[k] * (&self.dx[k] + self.beta * &self.df[k]);
                }
            }
        }
        self.prev = Some((x, f));
        next
    }
}

fn stack(a: &Field, b: &Field) -> DVector<f64> {
    DVector::from_iterator(a.values().len() * 2, a.values().iter().chain(b.values()).copied())
}

fn unstack(v: &DVector<f64>, like: &Field) -> Result<(Field, Field)> {
    let grid = like.grid();
    let n = grid.n_nodes();
    let mut a: Vec<f64> = v.as_slice()[..n].to_vec();
    let mut b: Vec<f64> = v.as_slice()[n..].to_vec();
    for j in 0..n {
        if grid.is_dirichlet(j) {
            a[j] = 0.0;
            b[j] = 0.0;
        }
    }
    Ok((Field::new(grid.clone(), a, true)?, Field::new(grid.clone(), b, true)?))
}

/// Increments stayed within a factor two of each other over the window.
fn stagnating(increments: &[f64]) -> bool {
    if increments.len() < STAGNATION_WINDOW {
        return false;
    }
    let w = &increments[increments.len() - STAGNATION_WINDOW..];
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = w.iter().copied().fold(0.0, f64::max);
    hi <= 2.0 * lo
}

/// `z^{k+1} = (1-ω) z^k + ω T(z^k)` until the relative L² increment drops
/// below `tol`. On stagnation `ω` is halved once; a second stagnation switches
/// to Anderson mixing with window 3. The report is honest about the outcome.
pub fn iterate(config: &ExponentConfig, barriers: &BarrierPair, options: &IterateOptions) -> Result<SolveReport> {
    if options.max_iter == 0 {
        return Err(invalid("max_iter must be at least 1"));
    }
    if !(options.tol > 0.0) || !(options.residual_tol > 0.0) {
        return Err(invalid("tolerances must be positive"));
    }
    if !(options.relaxation > 0.0 && options.relaxation <= 1.0) {
        return Err(invalid(format!("relaxation must lie in (0, 1], got {}", options.relaxation)));
    }
    let (mut z1, mut z2) = match options.initial {
        Initial::Lower => (barriers.lower[0].clone(), barriers.lower[1].clone()),
        Initial::Upper => (barriers.upper[0].clone(), barriers.upper[1].clone()),
        Initial::Midpoint => (barriers.midpoint(0), barriers.midpoint(1)),
    };
    let mut omega = options.relaxation;
    let mut halved = false;
    let mut anderson: Option<Anderson> = None;
    let mut history = Vec::new();
    let mut increments = Vec::new();
    let mut increment = f64::INFINITY;
    let mut residual = [f64::INFINITY; 2];

    for k in 1..=options.max_iter {
        let [f1, f2] = truncated_rhs(config, barriers, &z1, &z2)?;
        let (p1, p2) = (problem(config, 0, f1)?, problem(config, 1, f2)?);
        let (s1, s2) = rayon::join(|| plap::solve(&p1), || plap::solve(&p2));
        let (u1, u2) = (s1?.u, s2?.u);
        let energy = [plap::energy(&p1, &u1)?, plap::energy(&p2, &u2)?];

        let (n1, n2) = match anderson.as_mut() {
            Some(acc) => unstack(&acc.step(stack(&z1, &z2), stack(&u1, &u2)), &z1)?,
            None if omega == 1.0 => (u1.clone(), u2.clone()),
            None => {
                let mix = |z: &Field, u: &Field| -> Result<Field> {
                    let v = z.values().iter().zip(u.values()).map(|(a, b)| (1.0 - omega) * a + omega * b).collect();
                    Field::new(z.grid().clone(), v, true)
                };
                (mix(&z1, &u1)?, mix(&z2, &u2)?)
            }
        };
        increment = rel_l2(&n1, &z1).max(rel_l2(&n2, &z2));
        z1 = n1;
        z2 = n2;
        residual = truncated_residuals(config, barriers, &z1, &z2)?;
        let n = [norms(&z1, config.p[0])?, norms(&z2, config.p[1])?];
        history.push(IterationRecord {
            k,
            increment,
            lp_grad: [n[0].lp_gradient, n[1].lp_gradient],
            sup_grad: [n[0].sup_gradient, n[1].sup_gradient],
            residual,
            energy,
        });
        if increment <= options.tol {
            break;
        }
        increments.push(increment);
        if anderson.is_none() && stagnating(&increments) {
            increments.clear();
            if !halved {
                omega *= 0.5;
                halved = true;
            } else {
                anderson = Some(Anderson::new(ANDERSON_WINDOW, omega));
            }
        }
    }

    let apriori = track_apriori(&history)?;
    let converged = increment <= options.tol && residual.iter().all(|r| *r <= options.residual_tol);
    Ok(SolveReport {
        converged,
        iterations: history.len(),
        final_increment: increment,
        weak_residuals: residual,
        localization_violation: rectangle_excess(barriers, [&z1, &z2]),
        apriori_max_lp_grad: apriori.max_lp_grad,
        apriori_max_sup_grad: apriori.max_sup_grad,
        fields: [z1, z2],
        history,
        relaxation: omega,
        anderson: anderson.is_some(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriVerdict {
    pub max_lp_grad: [f64; 2],
    pub max_sup_grad: [f64; 2],
    /// No iterate exceeds ten times the median of the first five.
    pub bounded: bool,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Empirical a-priori bound on the gradient norms along an iteration.
pub fn track_apriori(history: &[IterationRecord]) -> Result<AprioriVerdict> {
    if history.is_empty() {
        return Err(invalid("iteration history is empty"));
    }
    let mut max_lp_grad = [0.0_f64; 2];
    let mut max_sup_grad = [0.0_f64; 2];
    let mut bounded = true;
    let head = &history[..history.len().min(5)];
    for i in 0..2 {
        for (series, max) in [
            (history.iter().map(|r| r.lp_grad[i]).collect::<Vec<_>>(), &mut max_lp_grad[i]),
            (history.iter().map(|r| r.sup_grad[i]).collect::<Vec<_>>(), &mut max_sup_grad[i]),
        ] {
            *max = series.iter().copied().fold(0.0, f64::max);
            let m = median(series[..head.len()].to_vec());
            if series.iter().any(|v| !v.is_finite() || *v > 10.0 * m) {
                bounded = false;
            }
        }
    }
    Ok(AprioriVerdict { max_lp_grad, max_sup_grad, bounded })
}
