//! Meshes of the unit interval and of the radial profile of the unit ball,
//! nodal fields, differentiation and boundary-weighted quadrature.
//!
//! Radial integrals carry the density `r^(N-1)` but not the surface measure of
//! the unit sphere; every integral in the crate uses the same convention, so
//! all comparisons stay consistent.

pub mod quadrature;

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use quadrature::{gauss_jacobi_unit, gauss_legendre_unit, lagrange, Rule};

/// Upper bound accepted for the grading exponent.
pub const MAX_GRADING: f64 = 4.0;

/// Default width of the boundary layer before snapping.
pub const DEFAULT_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    /// `(0, 1)` with Dirichlet data at both ends.
    Interval01,
    /// Radial profile `r ∈ [0, 1]` of the unit ball in `R^N`.
    RadialBall(usize),
}

impl DomainKind {
    /// Spatial dimension entering the volume density.
    pub fn dimension(&self) -> usize {
        match self {
            DomainKind::Interval01 => 1,
            DomainKind::RadialBall(n) => *n,
        }
    }
}

/// One-dimensional mesh on `[0, 1]`, graded toward the Dirichlet boundary.
#[derive(Debug, Clone)]
pub struct Grid {
    kind: DomainKind,
    nodes: Vec<f64>,
    grading_ratio: f64,
    quadrature_order: usize,
    rule: Rule,
    load_rule: Rule,
    poly_rule: Rule,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.nodes == other.nodes
    }
}

/// Power-law graded map of `s ∈ [0, 1]`; exponent 1 is uniform.
fn graded_nodes(kind: DomainKind, n_cells: usize, q: f64) -> Vec<f64> {
    let n = n_cells;
    match kind {
        DomainKind::Interval01 => {
            let mut nodes = vec![0.0; n + 1];
            for k in 0..=n / 2 {
                let s = 2.0 * k as f64 / n as f64;
                nodes[k] = 0.5 * s.powf(q);
            }
            for k in (n / 2 + 1)..=n {
                nodes[k] = 1.0 - nodes[n - k];
            }
            nodes[0] = 0.0;
            nodes[n] = 1.0;
            nodes
        }
        DomainKind::RadialBall(_) => {
            let mut nodes: Vec<f64> = (0..=n)
                .map(|k| 1.0 - (1.0 - k as f64 / n as f64).powf(q))
                .collect();
            nodes[0] = 0.0;
            nodes[n] = 1.0;
            nodes
        }
    }
}

impl Grid {
    /// Builds a graded mesh. `grading_ratio` is the exponent `q` of the map
    /// `s ↦ s^q` applied toward each Dirichlet end (1 gives a uniform mesh).
    pub fn build(
        kind: DomainKind,
        n_cells: usize,
        grading_ratio: f64,
        quadrature_order: usize,
    ) -> Result<Arc<Grid>> {
        if n_cells < 4 {
            return Err(invalid(format!("n_cells must be >= 4, got {n_cells}")));
        }
        if !grading_ratio.is_finite() || !(1.0..=MAX_GRADING).contains(&grading_ratio) {
            return Err(invalid(format!(
                "grading_ratio must lie in [1, {MAX_GRADING}], got {grading_ratio}"
            )));
        }
        let nodes = graded_nodes(kind, n_cells, grading_ratio);
        Self::from_nodes(kind, nodes, grading_ratio, quadrature_order)
    }

    /// Wraps an explicit node list after checking the mesh invariants.
    pub fn from_nodes(
        kind: DomainKind,
        nodes: Vec<f64>,
        grading_ratio: f64,
        quadrature_order: usize,
    ) -> Result<Arc<Grid>> {
        if let DomainKind::RadialBall(dim) = kind {
            if !(2..=32).contains(&dim) {
                return Err(invalid(format!("RadialBall needs 2 <= N <= 32, got {dim}")));
            }
        }
        if !(1..=10).contains(&quadrature_order) {
            return Err(invalid(format!(
                "quadrature_order must lie in [1, 10], got {quadrature_order}"
            )));
        }
        if nodes.len() < 5 {
            return Err(invalid("a grid needs at least 4 cells"));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite node coordinate"));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(invalid("nodes must start at 0 and end at 1"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("nodes must be strictly increasing"));
        }
        Ok(Arc::new(Grid {
            kind,
            nodes,
            grading_ratio,
            quadrature_order,
            rule: gauss_legendre_unit(quadrature_order),
            load_rule: gauss_legendre_unit(quadrature_order.max(4)),
            poly_rule: gauss_legendre_unit(10),
        }))
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn grading_ratio(&self) -> f64 {
        self.grading_ratio
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn cell(&self, c: usize) -> (f64, f64) {
        (self.nodes[c], self.nodes[c + 1])
    }

    pub fn cell_len(&self, c: usize) -> f64 {
        self.nodes[c + 1] - self.nodes[c]
    }

    /// Distance to the Dirichlet boundary.
    pub fn distance(&self, x: f64) -> f64 {
        match self.kind {
            DomainKind::Interval01 => x.min(1.0 - x),
            DomainKind::RadialBall(_) => 1.0 - x,
        }
    }

    /// Volume density of the radial reduction (`1` on the interval).
    pub fn density(&self, x: f64) -> f64 {
        match self.kind {
            DomainKind::Interval01 => 1.0,
            DomainKind::RadialBall(n) => x.powi(n as i32 - 1),
        }
    }

    pub fn is_dirichlet(&self, j: usize) -> bool {
        let last = self.n_nodes() - 1;
        match self.kind {
            DomainKind::Interval01 => j == 0 || j == last,
            DomainKind::RadialBall(_) => j == last,
        }
    }

    /// Indices of the nodes carrying unknowns (everything but Dirichlet nodes).
    pub fn free_nodes(&self) -> std::ops::Range<usize> {
        let last = self.n_nodes() - 1;
        match self.kind {
            DomainKind::Interval01 => 1..last,
            DomainKind::RadialBall(_) => 0..last,
        }
    }

    /// True if one end of the cell lies on the Dirichlet boundary.
    pub fn touches_boundary(&self, c: usize) -> bool {
        self.is_dirichlet(c) || self.is_dirichlet(c + 1)
    }

    /// Sub-intervals on which the distance function is affine.
    fn pieces(&self, c: usize) -> Vec<(f64, f64)> {
        let (a, b) = self.cell(c);
        if self.kind == DomainKind::Interval01 && a < 0.5 && b > 0.5 {
            vec![(a, 0.5), (0.5, b)]
        } else {
            vec![(a, b)]
        }
    }

    fn gauss_on_cell(&self, c: usize, rule: &Rule, mu: Option<f64>) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(rule.points.len());
        for (a, b) in self.pieces(c) {
            let h = b - a;
            for (s, w) in rule.points.iter().zip(&rule.weights) {
                let x = a + h * s;
                let mut wt = w * h * self.density(x);
                if let Some(mu) = mu {
                    wt *= self.distance(x).powf(mu);
                }
                out.push((x, wt));
            }
        }
        out
    }

    /// Product-integration weights: the interpolant of the integrand through
    /// the Gauss points is integrated exactly against `d^mu · density`. The
    /// distance is affine on the cell, so with `σ = d(x)` the integral is a
    /// difference of two `∫_0^L σ^mu · poly(σ) dσ` terms, each exact under a
    /// Gauss–Jacobi rule.
    fn product_rule(&self, c: usize, rule: &Rule, mu: f64) -> Vec<(f64, f64)> {
        let (a, b) = self.cell(c);
        let h = b - a;
        let (da, db) = (self.distance(a), self.distance(b));
        let xs: Vec<f64> = rule.points.iter().map(|s| a + h * s).collect();
        let q = xs.len();
        let n_jac = (q + self.kind.dimension()) / 2 + 1;
        let jac = gauss_jacobi_unit(n_jac, mu);
        let x_of_sigma = |sigma: f64| a + h * (sigma - da) / (db - da);
        let partial = |len: f64, k: usize| -> f64 {
            if len <= 0.0 {
                return 0.0;
            }
            let sum: f64 = jac
                .points
                .iter()
                .zip(&jac.weights)
                .map(|(&tau, &om)| {
                    let x = x_of_sigma(len * tau);
                    om * lagrange(&rule.points, k, (x - a) / h) * self.density(x)
                })
                .sum();
            len.powf(1.0 + mu) * sum
        };
        let (lo, hi) = (da.min(db), da.max(db));
        (0..q).map(|k| (xs[k], partial(hi, k) - partial(lo, k))).collect()
    }

    fn rule_for(&self, c: usize, rule: &Rule, mu: Option<f64>) -> Vec<(f64, f64)> {
        match mu {
            Some(mu) if self.pieces(c).len() == 1 && self.near_boundary(c) => {
                self.product_rule(c, rule, mu)
            }
            _ => self.gauss_on_cell(c, rule, mu),
        }
    }

    /// Cells whose distance to the boundary is at most twice their length;
    /// these get the analytic treatment of the weight.
    fn near_boundary(&self, c: usize) -> bool {
        let (a, b) = self.cell(c);
        self.distance(a).min(self.distance(b)) <= 2.0 * (b - a)
    }

    /// Quadrature points and weights on cell `c` for `∫ f · d^mu · density`.
    pub fn cell_rule(&self, c: usize, mu: Option<f64>) -> Vec<(f64, f64)> {
        self.rule_for(c, &self.rule, mu)
    }

    /// Same as [`Grid::cell_rule`] with at least four points, for load vectors.
    pub(crate) fn load_cell_rule(&self, c: usize, mu: Option<f64>) -> Vec<(f64, f64)> {
        self.rule_for(c, &self.load_rule, mu)
    }

    /// Quadrature points in the order expected by [`integrate`].
    pub fn quadrature_points(&self) -> Vec<f64> {
        (0..self.n_cells())
            .flat_map(|c| self.cell_rule(c, None).into_iter().map(|(x, _)| x))
            .collect()
    }

    /// `∫_cell density`, exact.
    pub fn cell_volume(&self, c: usize) -> f64 {
        self.gauss_on_cell(c, &self.poly_rule, None).iter().map(|(_, w)| w).sum()
    }

    /// `∫ φ_j · density` for every node hat function `φ_j`.
    pub fn hat_masses(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_nodes()];
        for c in 0..self.n_cells() {
            let (a, b) = self.cell(c);
            let h = b - a;
            for (x, w) in self.gauss_on_cell(c, &self.poly_rule, None) {
                m[c] += w * (b - x) / h;
                m[c + 1] += w * (x - a) / h;
            }
        }
        m
    }

    /// Largest distance value attained on the mesh interior.
    fn max_distance(&self) -> f64 {
        match self.kind {
            DomainKind::Interval01 => 0.5,
            DomainKind::RadialBall(_) => 1.0,
        }
    }

    /// Moves `delta` onto the nearest nodal distance value.
    pub fn snap_delta(&self, delta: f64) -> Result<f64> {
        check_delta(delta)?;
        let mut best = f64::NAN;
        let mut best_gap = f64::INFINITY;
        for &x in &self.nodes {
            let d = self.distance(x);
            if d <= 0.0 || d >= self.max_distance() {
                continue;
            }
            let gap = (d - delta).abs();
            if gap < best_gap {
                best_gap = gap;
                best = d;
            }
        }
        if best.is_nan() {
            return Err(invalid("grid has no interior node to snap delta onto"));
        }
        Ok(best)
    }

    /// True if the whole cell lies in `{d <= delta}`.
    pub fn cell_in_layer(&self, c: usize, delta: f64) -> bool {
        let (a, b) = self.cell(c);
        self.distance(a).max(self.distance(b)) <= delta * (1.0 + 1e-14)
    }

    /// CSV with header `node_index,coord`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node_index,coord\n");
        for (j, x) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{j},{}", fmt_f64(*x));
        }
        s
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(invalid(format!("delta must lie in (0, 1/2), got {delta}")));
    }
    Ok(())
}

/// Fixed 17-significant-digit formatting shared by every CSV writer.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Nodal scalar function on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
    dirichlet_zero: bool,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.values == other.values
            && self.dirichlet_zero == other.dirichlet_zero
    }
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, dirichlet_zero: bool) -> Result<Field> {
        if values.len() != grid.n_nodes() {
            return Err(invalid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at node {j}")));
        }
        if dirichlet_zero {
            if let Some(j) = (0..values.len()).find(|&j| grid.is_dirichlet(j) && values[j] != 0.0) {
                return Err(invalid(format!("Dirichlet node {j} carries {}", values[j])));
            }
        }
        Ok(Field { grid, values, dirichlet_zero })
    }

    /// Samples `f` at the nodes; with `dirichlet_zero` the boundary values are
    /// set to exactly zero.
    pub fn from_fn(grid: &Arc<Grid>, dirichlet_zero: bool, f: impl Fn(f64) -> f64) -> Field {
        let values = grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(j, &x)| if dirichlet_zero && grid.is_dirichlet(j) { 0.0 } else { f(x) })
            .collect();
        Field { grid: grid.clone(), values, dirichlet_zero }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field { grid: grid.clone(), values: vec![0.0; grid.n_nodes()], dirichlet_zero: true }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dirichlet_zero(&self) -> bool {
        self.dirichlet_zero
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Nodewise `t · self`.
    pub fn scaled(&self, t: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| t * v).collect(),
            dirichlet_zero: self.dirichlet_zero,
        }
    }

    /// Nodewise map; the Dirichlet flag is dropped.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            dirichlet_zero: false,
        }
    }

    /// Linear interpolant evaluated at `x`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let nodes = self.grid.nodes();
        let c = match nodes.binary_search_by(|n| n.total_cmp(&x)) {
            Ok(j) => return self.values[j],
            Err(i) => i.clamp(1, nodes.len() - 1) - 1,
        };
        let (a, b) = self.grid.cell(c);
        let t = (x - a) / (b - a);
        (1.0 - t) * self.values[c] + t * self.values[c + 1]
    }

    /// CSV with header `coord,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("coord,value\n");
        for (x, v) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(s, "{},{}", fmt_f64(*x), fmt_f64(*v));
        }
        s
    }

    /// Parses the `coord,value` CSV; coordinates must match the grid nodes.
    pub fn from_csv(grid: &Arc<Grid>, text: &str, dirichlet_zero: bool) -> Result<Field> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "coord,value" => {}
            _ => return Err(Error::Parse { line: 1, message: "expected header coord,value".into() }),
        }
        let mut values = Vec::with_capacity(grid.n_nodes());
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })
            };
            let mut parts = line.split(',');
            let (Some(xs), Some(vs), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse { line: i + 1, message: "expected two columns".into() });
            };
            let x = parse(xs)?;
            let v = parse(vs)?;
            let j = values.len();
            if j >= grid.n_nodes() || (grid.nodes()[j] - x).abs() > 1e-12 {
                return Err(Error::Parse { line: i + 1, message: format!("coordinate {x} does not match the grid") });
            }
            values.push(v);
        }
        Field::new(grid.clone(), values, dirichlet_zero)
    }
}

/// `d(x)` sampled at the nodes.
pub fn distance_field(grid: &Arc<Grid>) -> Field {
    let values = grid.nodes().iter().map(|&x| grid.distance(x)).collect();
    Field { grid: grid.clone(), values, dirichlet_zero: true }
}

/// Nodes with `d(x) < delta`.
pub fn boundary_layer_mask(grid: &Grid, delta: f64) -> Result<Vec<bool>> {
    check_delta(delta)?;
    Ok(grid.nodes().iter().map(|&x| grid.distance(x) < delta).collect())
}

/// `∫ f · d^mu` (density included) from integrand values at
/// [`Grid::quadrature_points`]. Cells touching the boundary integrate the
/// weight analytically against the interpolant of the integrand.
pub fn integrate(grid: &Grid, integrand: &[f64], weight_mu: Option<f64>) -> Result<f64> {
    if let Some(mu) = weight_mu {
        if !(mu > -1.0) {
            return Err(Error::NonIntegrableWeight { mu });
        }
    }
    let mut total = 0.0;
    let mut k = 0;
    for c in 0..grid.n_cells() {
        for (_, w) in grid.cell_rule(c, weight_mu) {
            let v = *integrand
                .get(k)
                .ok_or_else(|| invalid("too few integrand values for the quadrature points"))?;
            total += w * v;
            k += 1;
        }
    }
    if k != integrand.len() {
        return Err(invalid("too many integrand values for the quadrature points"));
    }
    Ok(total)
}

/// Convenience wrapper around [`integrate`] for a closure integrand.
pub fn integrate_fn(grid: &Grid, weight_mu: Option<f64>, f: impl Fn(f64) -> f64) -> Result<f64> {
    let values: Vec<f64> = grid.quadrature_points().into_iter().map(f).collect();
    integrate(grid, &values, weight_mu)
}

/// Per-cell difference quotients.
pub fn gradient(field: &Field) -> Vec<f64> {
    let g = field.grid();
    let v = field.values();
    (0..g.n_cells()).map(|c| (v[c + 1] - v[c]) / g.cell_len(c)).collect()
}

/// Magnitude of the mean of the adjacent cell gradients at every node; end
/// nodes use their single cell.
pub fn nodal_gradient_magnitude(field: &Field) -> Vec<f64> {
    let cells = gradient(field);
    let n = field.grid().n_nodes();
    (0..n)
        .map(|j| {
            if j == 0 {
                cells[0].abs()
            } else if j == n - 1 {
                cells[n - 2].abs()
            } else {
                (0.5 * (cells[j - 1] + cells[j])).abs()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub lp_gradient: f64,
    pub sup_gradient: f64,
    pub lp_value: f64,
    pub sup_value: f64,
}

pub fn norms(field: &Field, p: f64) -> Result<Norms> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(invalid(format!("norm exponent must exceed 1, got {p}")));
    }
    let g = field.grid();
    let grads = gradient(field);
    let lp_gradient = (0..g.n_cells())
        .map(|c| g.cell_volume(c) * grads[c].abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p);
    let sup_gradient = grads.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let mut lp_value = 0.0;
    for c in 0..g.n_cells() {
        for (x, w) in g.cell_rule(c, None) {
            lp_value += w * field.interpolate(x).abs().powf(p);
        }
    }
    let lp_value = lp_value.powf(1.0 / p);
    let sup_value = field.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(Norms { lp_gradient, sup_gradient, lp_value, sup_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Arc<Grid> {
        Grid::build(DomainKind::Interval01, n, 1.0, 2).unwrap()
    }

    #[test]
    fn uniform_partition() {
        let g = uniform(4);
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn graded_interval_shrinks_toward_both_ends() {
        let g = Grid::build(DomainKind::Interval01, 4, 2.0, 2).unwrap();
        let w: Vec<f64> = (0..4).map(|c| g.cell_len(c)).collect();
        assert!(w[0] < w[1] && w[3] < w[2]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let g = Grid::build(DomainKind::Interval01, 64, 1.7, 3).unwrap();
        for c in 0..31 {
            assert!(g.cell_len(c) < g.cell_len(c + 1));
        }
        for c in 32..63 {
            assert!(g.cell_len(c) > g.cell_len(c + 1));
        }
        assert_eq!(g.nodes()[32], 0.5);
    }

    #[test]
    fn odd_interval_mesh_is_symmetric() {
        let g = Grid::build(DomainKind::Interval01, 7, 1.5, 2).unwrap();
        for j in 0..=7 {
            assert!((g.nodes()[j] + g.nodes()[7 - j] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn radial_grid_refines_at_the_sphere() {
        let g = Grid::build(DomainKind::RadialBall(3), 128, 1.5, 3).unwrap();
        assert_eq!(g.n_nodes(), 129);
        assert_eq!(*g.nodes().last().unwrap(), 1.0);
        let smallest = (0..128).min_by(|&a, &b| g.cell_len(a).total_cmp(&g.cell_len(b))).unwrap();
        assert_eq!(smallest, 127);
    }

    #[test]
    fn build_rejects_bad_parameters() {
        assert!(Grid::build(DomainKind::Interval01, 3, 1.0, 2).is_err());
        assert!(Grid::build(DomainKind::Interval01, 8, f64::NAN, 2).is_err());
        assert!(Grid::build(DomainKind::Interval01, 8, 0.5, 2).is_err());
        assert!(Grid::build(DomainKind::Interval01, 8, 1.0, 0).is_err());
        assert!(Grid::build(DomainKind::Interval01, 8, 1.0, 11).is_err());
        assert!(Grid::build(DomainKind::RadialBall(1), 8, 1.0, 2).is_err());
    }

    #[test]
    fn distance_values() {
        let g = uniform(4);
        let d = distance_field(&g);
        assert_eq!(d.values()[1], 0.25);
        assert_eq!(d.values()[2], 0.5);
        let b = Grid::build(DomainKind::RadialBall(3), 8, 1.0, 2).unwrap();
        let d = distance_field(&b);
        assert_eq!(*d.values().last().unwrap(), 0.0);
        assert_eq!(d.values()[0], 1.0);
    }

    #[test]
    fn layer_masks() {
        let g = uniform(4);
        assert_eq!(boundary_layer_mask(&g, 0.3).unwrap(), vec![true, true, false, true, true]);
        assert_eq!(boundary_layer_mask(&g, 0.01).unwrap(), vec![true, false, false, false, true]);
        assert!(boundary_layer_mask(&g, 0.0).is_err());
        assert!(boundary_layer_mask(&g, 0.5).is_err());
        let b = Grid::build(DomainKind::RadialBall(3), 50, 1.3, 2).unwrap();
        let m = boundary_layer_mask(&b, 0.1).unwrap();
        for (x, flag) in b.nodes().iter().zip(m) {
            assert_eq!(flag, 1.0 - x < 0.1);
        }
    }

    #[test]
    fn snapped_delta_is_a_nodal_distance() {
        let g = Grid::build(DomainKind::RadialBall(3), 64, 1.5, 2).unwrap();
        let d = g.snap_delta(0.1).unwrap();
        assert!(g.nodes().iter().any(|&x| g.distance(x) == d));
        assert!((d - 0.1).abs() < 0.05);
    }

    #[test]
    fn integrate_constant_and_singular_weight() {
        let g = uniform(16);
        let one = integrate_fn(&g, None, |_| 1.0).unwrap();
        assert!((one - 1.0).abs() < 1e-15);
        // 2 ∫_0^{1/2} t^{-1/2} dt = 4 (1/2)^{1/2}
        let exact = 4.0 * 0.5f64.sqrt();
        let w = integrate_fn(&g, Some(-0.5), |_| 1.0).unwrap();
        assert!((w - exact).abs() < 1e-3, "{w} vs {exact}");
        let g = Grid::build(DomainKind::Interval01, 64, 2.0, 4).unwrap();
        let w = integrate_fn(&g, Some(-0.5), |_| 1.0).unwrap();
        assert!((w - exact).abs() < 1e-8, "{w} vs {exact}");
        assert!(matches!(
            integrate_fn(&g, Some(-1.0), |_| 1.0),
            Err(Error::NonIntegrableWeight { .. })
        ));
    }

    #[test]
    fn integrate_radial_volume() {
        let g = Grid::build(DomainKind::RadialBall(3), 32, 1.5, 3).unwrap();
        let v = integrate_fn(&g, None, |_| 1.0).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
        // ∫_0^1 (1-r)^mu r^2 dr = B(3, mu+1) = 2 / ((mu+1)(mu+2)(mu+3))
        let mu = -0.4;
        let v = integrate_fn(&g, Some(mu), |_| 1.0).unwrap();
        let exact = 2.0 / ((mu + 1.0) * (mu + 2.0) * (mu + 3.0));
        assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
    }

    #[test]
    fn hat_masses_sum_to_volume() {
        for kind in [DomainKind::Interval01, DomainKind::RadialBall(4)] {
            let g = Grid::build(kind, 20, 1.4, 2).unwrap();
            let total: f64 = g.hat_masses().iter().sum();
            let vol = integrate_fn(&g, None, |_| 1.0).unwrap();
            assert!((total - vol).abs() < 1e-14);
        }
    }

    #[test]
    fn gradients() {
        let g = uniform(8);
        let d = distance_field(&g);
        let s = gradient(&d);
        assert!(s[..4].iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(s[4..].iter().all(|&v| (v + 1.0).abs() < 1e-15));
        let c = Field::from_fn(&g, false, |_| 3.0);
        assert!(gradient(&c).iter().all(|&v| v == 0.0));
        let x = Field::from_fn(&g, false, |x| x);
        assert!(gradient(&x).iter().all(|&v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn norm_values() {
        let g = uniform(64);
        let d = distance_field(&g);
        let n = norms(&d, 2.0).unwrap();
        assert!((n.lp_gradient - 1.0).abs() < 1e-14);
        let z = Field::zeros(&g);
        let n = norms(&z, 3.0).unwrap();
        assert_eq!((n.lp_gradient, n.sup_gradient, n.lp_value, n.sup_value), (0.0, 0.0, 0.0, 0.0));
        let g = uniform(1024);
        let u = Field::from_fn(&g, true, |x| x * (1.0 - x));
        let n = norms(&u, 2.0).unwrap();
        assert!((n.lp_gradient - (1.0f64 / 3.0).sqrt()).abs() < 1e-6);
        assert!(norms(&u, 1.0).is_err());
    }

    #[test]
    fn field_invariants() {
        let g = uniform(4);
        assert!(Field::new(g.clone(), vec![0.0; 4], true).is_err());
        assert!(Field::new(g.clone(), vec![0.0, 1.0, f64::NAN, 1.0, 0.0], true).is_err());
        assert!(Field::new(g.clone(), vec![1.0, 1.0, 1.0, 1.0, 0.0], true).is_err());
        assert!(Field::new(g.clone(), vec![1.0, 1.0, 1.0, 1.0, 0.0], false).is_ok());
        let b = Grid::build(DomainKind::RadialBall(2), 4, 1.0, 2).unwrap();
        assert!(Field::new(b, vec![1.0, 1.0, 1.0, 1.0, 0.0], true).is_ok());
    }

    #[test]
    fn field_csv_roundtrip() {
        let g = Grid::build(DomainKind::RadialBall(3), 10, 1.5, 2).unwrap();
        let f = Field::from_fn(&g, true, |r| (1.0 - r * r) / 6.0);
        let back = Field::from_csv(&g, &f.to_csv(), true).unwrap();
        assert_eq!(back, f);
        assert!(g.to_csv().starts_with("node_index,coord\n0,"));
        assert!(Field::from_csv(&g, "x,y\n", true).is_err());
    }
}
