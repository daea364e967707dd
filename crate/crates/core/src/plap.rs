//! Scalar Dirichlet problem `-Δ_p u = g` on a [`Grid`], solved by minimizing
//! the discrete energy `J(u) = (1/p) ∫ |u'|^p - ∫ g u` over continuous
//! piecewise-linear fields.
//!
//! Load vectors: a nodal right-hand side is integrated with the lumped rule
//! `L_j = g_j ∫ φ_j`; a [`SingularRhs`] is integrated against the hat functions
//! with the boundary-weighted quadrature of [`crate::domain`].

use std::sync::Arc;

use crate::domain::{DomainKind, Field, Grid};
use crate::error::{invalid, Error, Result};

/// Default stopping tolerance on the interval.
pub const DEFAULT_TOL_INTERVAL: f64 = 1e-10;
/// Default stopping tolerance on the radial ball.
pub const DEFAULT_TOL_RADIAL: f64 = 1e-8;
/// Initial regularization, relative to the largest cell gradient.
pub const DEFAULT_REGULARIZATION: f64 = 1e-2;
pub const DEFAULT_MAX_NEWTON_ITER: usize = 400;

/// Right-hand side on the boundary layer `{d < delta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLayer {
    pub delta: f64,
    pub value: f64,
}

/// `g(x) = scale · (constant + d(x)^mu)` off the layer, `scale · layer.value`
/// inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularRhs {
    pub constant: f64,
    pub mu: f64,
    pub layer: Option<BoundaryLayer>,
    pub scale: f64,
}

impl SingularRhs {
    pub fn new(constant: f64, mu: f64) -> SingularRhs {
        SingularRhs { constant, mu, layer: None, scale: 1.0 }
    }

    pub fn with_layer(mut self, delta: f64, value: f64) -> SingularRhs {
        self.layer = Some(BoundaryLayer { delta, value });
        self
    }

    pub fn scaled(mut self, t: f64) -> SingularRhs {
        self.scale *= t;
        self
    }

    /// Pointwise value; `d(x) = 0` is outside the domain of definition when
    /// `mu < 0`.
    pub fn value_at(&self, grid: &Grid, x: f64) -> f64 {
        let d = grid.distance(x);
        match self.layer {
            Some(l) if d < l.delta => self.scale * l.value,
            _ => self.scale * (self.constant + d.powf(self.mu)),
        }
    }

    fn in_layer(&self, grid: &Grid, c: usize) -> Option<f64> {
        self.layer.filter(|l| grid.cell_in_layer(c, l.delta)).map(|l| l.value)
    }

    /// `∫ g φ_j` for every node.
    pub fn load(&self, grid: &Grid) -> Vec<f64> {
        let mut load = vec![0.0; grid.n_nodes()];
        for c in 0..grid.n_cells() {
            let (a, b) = grid.cell(c);
            let h = b - a;
            let mut add = |rule: Vec<(f64, f64)>, factor: f64| {
                for (x, w) in rule {
                    load[c] += factor * w * (b - x) / h;
                    load[c + 1] += factor * w * (x - a) / h;
                }
            };
            match self.in_layer(grid, c) {
                Some(v) => add(grid.load_cell_rule(c, None), v),
                None => {
                    add(grid.load_cell_rule(c, None), self.constant);
                    add(grid.load_cell_rule(c, Some(self.mu)), 1.0);
                }
            }
        }
        for (j, l) in load.iter_mut().enumerate() {
            *l = if grid.is_dirichlet(j) { 0.0 } else { *l * self.scale };
        }
        load
    }

    /// `‖g‖_{L¹}`; exact whenever the constant part is nonnegative.
    pub fn l1_norm(&self, grid: &Grid) -> f64 {
        let mut total = 0.0;
        for c in 0..grid.n_cells() {
            total += match self.in_layer(grid, c) {
                Some(v) => v.abs() * grid.cell_volume(c),
                None if self.constant >= 0.0 => {
                    let weighted: f64 = grid.load_cell_rule(c, Some(self.mu)).iter().map(|p| p.1).sum();
                    self.constant * grid.cell_volume(c) + weighted
                }
                None => grid
                    .load_cell_rule(c, None)
                    .iter()
                    .map(|&(x, w)| w * (self.constant + grid.distance(x).powf(self.mu)).abs())
                    .sum(),
            };
        }
        total * self.scale.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    /// Nodal values; Dirichlet entries are ignored.
    Nodal(Field),
    Singular(SingularRhs),
}

impl Rhs {
    /// `t · g`.
    pub fn scaled(&self, t: f64) -> Rhs {
        match self {
            Rhs::Nodal(f) => Rhs::Nodal(f.scaled(t)),
            Rhs::Singular(s) => Rhs::Singular(s.scaled(t)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlapProblem {
    pub grid: Arc<Grid>,
    pub p: f64,
    pub rhs: Rhs,
    pub regularization_eps: f64,
    pub tol: f64,
    pub max_newton_iter: usize,
}

impl PlapProblem {
    /// Problem with the default solver settings for the grid kind.
    pub fn new(grid: Arc<Grid>, p: f64, rhs: Rhs) -> Result<PlapProblem> {
        let tol = match grid.kind() {
            DomainKind::Interval01 => DEFAULT_TOL_INTERVAL,
            DomainKind::RadialBall(_) => DEFAULT_TOL_RADIAL,
        };
        let problem = PlapProblem {
            grid,
            p,
            rhs,
            regularization_eps: DEFAULT_REGULARIZATION,
            tol,
            max_newton_iter: DEFAULT_MAX_NEWTON_ITER,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn with_tol(mut self, tol: f64) -> Result<PlapProblem> {
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(invalid(format!("p must exceed 1, got {}", self.p)));
        }
        if let DomainKind::RadialBall(n) = self.grid.kind() {
            if self.p >= n as f64 {
                return Err(invalid(format!("p = {} must stay below N = {n}", self.p)));
            }
        }
        if !(self.regularization_eps > 0.0) {
            return Err(invalid("regularization_eps must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol must be positive"));
        }
        match &self.rhs {
            Rhs::Nodal(f) if !Arc::ptr_eq(f.grid(), &self.grid) && **f.grid() != *self.grid => {
                return Err(Error::GridMismatch)
            }
            Rhs::Singular(s) => {
                if !(s.mu > -1.0) {
                    return Err(Error::NonIntegrableWeight { mu: s.mu });
                }
                if !s.constant.is_finite() || !s.scale.is_finite() {
                    return Err(invalid("non-finite right-hand side coefficient"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Everything the solver needs that does not depend on the iterate.
struct Discretization {
    lengths: Vec<f64>,
    volumes: Vec<f64>,
    load: Vec<f64>,
    free: std::ops::Range<usize>,
    normalization: f64,
}

impl Discretization {
    fn new(problem: &PlapProblem) -> Discretization {
        let grid = &problem.grid;
        let (load, l1) = match &problem.rhs {
            Rhs::Nodal(f) => {
                let m = grid.hat_masses();
                let load: Vec<f64> = (0..grid.n_nodes())
                    .map(|j| if grid.is_dirichlet(j) { 0.0 } else { f.values()[j] * m[j] })
                    .collect();
                let l1 = load.iter().map(|l| l.abs()).sum();
                (load, l1)
            }
            Rhs::Singular(s) => (s.load(grid), s.l1_norm(grid)),
        };
        Discretization {
            lengths: (0..grid.n_cells()).map(|c| grid.cell_len(c)).collect(),
            volumes: (0..grid.n_cells()).map(|c| grid.cell_volume(c)).collect(),
            load,
            free: grid.free_nodes(),
            normalization: 1.0 + l1,
        }
    }

    fn slopes(&self, u: &[f64]) -> Vec<f64> {
        (0..self.lengths.len()).map(|c| (u[c + 1] - u[c]) / self.lengths[c]).collect()
    }

    /// `J_eps(u)`; `eps = 0` is the true energy.
    fn energy(&self, u: &[f64], p: f64, eps: f64) -> f64 {
        let slopes = self.slopes(u);
        let stored: f64 = slopes
            .iter()
            .zip(&self.volumes)
            .map(|(s, w)| w * (s * s + eps * eps).powf(0.5 * p) / p)
            .sum();
        let work: f64 = self.load.iter().zip(u).map(|(l, v)| l * v).sum();
        stored - work
    }

    /// Gradient of `J_eps` at every node (Dirichlet entries are zero).
    fn gradient(&self, u: &[f64], p: f64, eps: f64) -> Vec<f64> {
        let slopes = self.slopes(u);
        let mut g = vec![0.0; u.len()];
        for (c, s) in slopes.iter().enumerate() {
            let flux = self.volumes[c] * flux_eps(*s, p, eps) / self.lengths[c];
            g[c] -= flux;
            g[c + 1] += flux;
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = if self.free.contains(&j) { *gj - self.load[j] } else { 0.0 };
        }
        g
    }

    /// Residual that rounding of the nodal values alone can produce: each
    /// slope is perturbed by a few ulps of its endpoint values. Only matters
    /// for `p < 2`, where the flux is not Lipschitz at zero slope.
    fn rounding_floor(&self, u: &[f64], p: f64) -> f64 {
        let slopes = self.slopes(u);
        let mut r = vec![0.0; u.len()];
        for (c, s) in slopes.iter().enumerate() {
            let ds = 4.0 * f64::EPSILON * (u[c].abs() + u[c + 1].abs()) / self.lengths[c];
            let df = (flux_eps(s.abs() + ds, p, 0.0) - flux_eps(s.abs(), p, 0.0)).abs();
            let k = self.volumes[c] * df / self.lengths[c];
            r[c] += k;
            r[c + 1] += k;
        }
        self.max_abs(&r) / self.normalization
    }

    fn max_abs(&self, g: &[f64]) -> f64 {
        g[self.free.clone()].iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Newton direction for `J_eps`: solves the tridiagonal Hessian system.
    fn newton_direction(&self, u: &[f64], grad: &[f64], p: f64, eps: f64) -> Vec<f64> {
        let slopes = self.slopes(u);
        let n = u.len();
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for (c, s) in slopes.iter().enumerate() {
            let k = self.volumes[c] * dflux_eps(*s, p, eps) / (self.lengths[c] * self.lengths[c]);
            diag[c] += k;
            diag[c + 1] += k;
            off[c] -= k;
        }
        let r = self.free.clone();
        let rhs: Vec<f64> = grad[r.clone()].iter().map(|g| -g).collect();
        let sub = &off[r.start..r.end - 1];
        let step = solve_tridiagonal(sub, &diag[r.clone()], sub, &rhs);
        let mut d = vec![0.0; n];
        d[r].copy_from_slice(&step);
        d
    }
}

/// `(s² + eps²)^{(p-2)/2} s`.
fn flux_eps(s: f64, p: f64, eps: f64) -> f64 {
    if eps == 0.0 {
        if s == 0.0 {
            0.0
        } else {
            s.abs().powf(p - 2.0) * s
        }
    } else {
        (s * s + eps * eps).powf(0.5 * (p - 2.0)) * s
    }
}

/// Derivative of [`flux_eps`] in `s`.
fn dflux_eps(s: f64, p: f64, eps: f64) -> f64 {
    if p == 2.0 {
        return 1.0;
    }
    let q = s * s + eps * eps;
    q.powf(0.5 * (p - 4.0)) * ((p - 1.0) * s * s + eps * eps)
}

/// Thomas algorithm for a symmetric positive definite tridiagonal system.
pub(crate) fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    c[0] = if n > 1 { sup[0] / denom } else { 0.0 };
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = sup[i] / denom;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Field,
    /// Newton steps taken over all continuation stages.
    pub iterations: usize,
    /// Final normalized first-order residual (same quantity as [`weak_residual`]).
    pub residual: f64,
    /// Regularized energy of every accepted iterate at the regularization in
    /// force when it was accepted.
    pub energy_trace: Vec<f64>,
}

/// True energy `(1/p) ∫ |u'|^p - ∫ g u`.
pub fn energy(problem: &PlapProblem, u: &Field) -> Result<f64> {
    check_grid(problem, u)?;
    Ok(Discretization::new(problem).energy(u.values(), problem.p, 0.0))
}

/// Largest hat-function residual of the weak form, normalized by
/// `1 + ‖g‖_{L¹}`.
pub fn weak_residual(problem: &PlapProblem, u: &Field) -> Result<f64> {
    check_grid(problem, u)?;
    let disc = Discretization::new(problem);
    let g = disc.gradient(u.values(), problem.p, 0.0);
    Ok(disc.max_abs(&g) / disc.normalization)
}

fn check_grid(problem: &PlapProblem, u: &Field) -> Result<()> {
    if Arc::ptr_eq(u.grid(), &problem.grid) || **u.grid() == *problem.grid {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Minimizer of the discrete energy: damped Newton on the regularized energy
/// with `(|s|² + eps²)^{(p-2)/2}` in place of `|s|^{p-2}`, shrinking `eps`
/// geometrically until the unregularized residual meets `tol`. The initial
/// guess is the `p = 2` solution, continued in `p` when `|p - 2| > 1`.
///
/// For `p < 2` the flux is not Lipschitz at zero slope, and a cell whose
/// slope nearly vanishes can keep the residual above `tol` for reasons of
/// floating-point resolution alone. Once the regularization reaches its floor
/// such a solve is accepted if the residual is within ten times that rounding
/// level, and the reported `residual` says how far it got.
pub fn solve(problem: &PlapProblem) -> Result<Solution> {
    problem.validate()?;
    let disc = Discretization::new(problem);
    let grid = &problem.grid;
    let n = grid.n_nodes();
    let mut trace = Vec::new();
    let mut iterations = 0;

    let mut u = vec![0.0; n];
    if disc.max_abs(&disc.load) == 0.0 {
        return Ok(Solution { u: Field::zeros(grid), iterations: 0, residual: 0.0, energy_trace: trace });
    }
    // linear solve for p = 2 (one exact Newton step from zero)
    let g0 = disc.gradient(&u, 2.0, 0.0);
    u = disc.newton_direction(&u, &g0, 2.0, 0.0);

    let p = problem.p;
    if (p - 2.0).abs() > 1.0 {
        let steps = ((p - 2.0).abs() / 0.5).ceil() as usize;
        for k in 1..steps {
            let pk = 2.0 + (p - 2.0) * k as f64 / steps as f64;
            let loose = problem.tol.max(1e-6);
            let mut scratch = Vec::new();
            newton(&disc, &mut u, pk, problem, loose, &mut iterations, &mut scratch)?;
        }
    }
    let residual = newton(&disc, &mut u, p, problem, problem.tol, &mut iterations, &mut trace)?;
    for j in 0..n {
        if grid.is_dirichlet(j) {
            u[j] = 0.0;
        }
    }
    Ok(Solution { u: Field::new(grid.clone(), u, true)?, iterations, residual, energy_trace: trace })
}

const EPS_FLOOR: f64 = 1e-18;

fn newton(
    disc: &Discretization,
    u: &mut Vec<f64>,
    p: f64,
    problem: &PlapProblem,
    tol: f64,
    iterations: &mut usize,
    trace: &mut Vec<f64>,
) -> Result<f64> {
    let fail = |u: &[f64], iterations: usize, residual: f64| Error::NonConvergence {
        iterations,
        residual,
        last: Box::new(
            Field::new(problem.grid.clone(), u.to_vec(), false)
                .unwrap_or_else(|_| Field::zeros(&problem.grid)),
        ),
    };
    let mut eps_rel = problem.regularization_eps;
    loop {
        let slope_scale = disc.slopes(u).iter().fold(0.0_f64, |m, s| m.max(s.abs()));
        let eps = eps_rel * slope_scale.max(f64::MIN_POSITIVE);
        let mut grad = disc.gradient(u, p, eps);
        let mut e = disc.energy(u, p, eps);
        trace.push(e);
        let mut stalls = 0;
        loop {
            let residual = disc.max_abs(&disc.gradient(u, p, 0.0)) / disc.normalization;
            if residual <= tol {
                return Ok(residual);
            }
            if *iterations >= problem.max_newton_iter {
                return Err(fail(u, *iterations, residual));
            }
            *iterations += 1;
            let dir = disc.newton_direction(u, &grad, p, eps);
            let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let gnorm = disc.max_abs(&grad);
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
                let et = disc.energy(&trial, p, eps);
                let armijo = et <= e + 1e-4 * alpha * slope;
                // energies agree to rounding: fall back on the gradient norm
                let flat = (et - e).abs() <= 1e-13 * (e.abs() + 1e-300);
                let gt = disc.gradient(&trial, p, eps);
                if et.is_finite() && (armijo || (flat && disc.max_abs(&gt) < gnorm)) {
                    accepted = Some((trial, et, gt));
                    break;
                }
                alpha *= 0.5;
            }
            let Some((trial, et, gt)) = accepted else { break };
            *u = trial;
            let decrease = e - et;
            e = et;
            grad = gt;
            trace.push(e);
            // the regularized problem is solved well past the regularization
            // error, or slow steps that no longer lower the energy: shrink eps
            let g_reg = disc.max_abs(&grad);
            stalls = if g_reg > 0.5 * gnorm && decrease <= 1e-12 * e.abs() { stalls + 1 } else { 0 };
            if g_reg / disc.normalization <= 1e-2 * tol.min(residual) || stalls >= 3 {
                break;
            }
        }
        if eps_rel <= EPS_FLOOR {
            let residual = disc.max_abs(&disc.gradient(u, p, 0.0)) / disc.normalization;
            if residual <= tol.max(10.0 * disc.rounding_floor(u, p)) {
                return Ok(residual);
            }
            return Err(fail(u, *iterations, residual));
        }
        eps_rel *= 0.1;
    }
}
