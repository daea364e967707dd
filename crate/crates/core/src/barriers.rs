//! Sub- and supersolution pairs built from torsion-type auxiliary problems,
//! and the search for the multiplier `C`.
//!
//! Convective system: `ξ_i` solves `-Δ_{p_i} ξ = 1 + d^{μ_i}` and `ξ_{i,δ}` the
//! same problem with right-hand side `-1` on the layer `{d < δ}`. Absorption
//! system: `z_i`, `z_{i,δ}` with `d^{μ_i}` in place of `1 + d^{μ_i}`. The pair is
//! `lower_i = C^{-1} · (δ-variant)`, `upper_i = C · (plain variant)`.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::domain::{distance_field, fmt_f64, gradient, Field, Grid};
use crate::error::{invalid, CalibrationDiagnostic, Error, Result};
use crate::plap::{self, PlapProblem, Rhs, SingularRhs};
use crate::systems::{power, ExponentConfig, SystemKind};

pub const DEFAULT_C_MAX: f64 = 1e6;
pub const DEFAULT_N_BISECT: usize = 40;
/// Relative width at which the bisection on `C` stops.
pub const C_REL_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxKind {
    XiConvective,
    XiDeltaConvective,
    ZAbsorption,
    ZDeltaAbsorption,
}

impl AuxKind {
    /// Plain and layered variants for a system.
    pub fn pair(system: SystemKind) -> (AuxKind, AuxKind) {
        match system {
            SystemKind::Convective => (AuxKind::XiConvective, AuxKind::XiDeltaConvective),
            SystemKind::Absorption => (AuxKind::ZAbsorption, AuxKind::ZDeltaAbsorption),
        }
    }

    fn layered(self) -> bool {
        matches!(self, AuxKind::XiDeltaConvective | AuxKind::ZDeltaAbsorption)
    }
}

/// Right-hand side of an auxiliary problem for component `i`; `delta` must
/// already be snapped for the layered variants.
pub fn auxiliary_rhs(config: &ExponentConfig, which: AuxKind, i: usize, delta: f64) -> SingularRhs {
    let constant = match which {
        AuxKind::XiConvective | AuxKind::XiDeltaConvective => 1.0,
        AuxKind::ZAbsorption | AuxKind::ZDeltaAbsorption => 0.0,
    };
    let rhs = SingularRhs::new(constant, config.mu(i));
    if which.layered() {
        rhs.with_layer(delta, -1.0)
    } else {
        rhs
    }
}

/// Solves one auxiliary problem; `delta` is snapped to the grid first.
pub fn solve_auxiliary(
    config: &ExponentConfig,
    grid: &Arc<Grid>,
    which: AuxKind,
    i: usize,
    delta: f64,
) -> Result<Field> {
    if i > 1 {
        return Err(invalid(format!("component index must be 0 or 1, got {i}")));
    }
    let mu = config.mu(i);
    if !(mu > -1.0) {
        return Err(Error::NonIntegrableWeight { mu });
    }
    let delta = grid.snap_delta(delta)?;
    let rhs = auxiliary_rhs(config, which, i, delta);
    let problem = PlapProblem::new(grid.clone(), config.p[i], Rhs::Singular(rhs))?;
    Ok(plap::solve(&problem)?.u)
}

/// `(min, max)` of `field / d` over interior nodes.
pub fn estimate_envelope(field: &Field, d: &Field) -> Result<(f64, f64)> {
    field.check_same_grid(d)?;
    let grid = field.grid();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for j in grid.free_nodes() {
        let v = field.values()[j];
        if !(v > 0.0) {
            return Err(Error::BarrierDegeneracy { node: j, value: v });
        }
        let dj = d.values()[j];
        if !(dj > 0.0) {
            return Err(invalid(format!("distance vanishes at interior node {j}")));
        }
        lo = lo.min(v / dj);
        hi = hi.max(v / dj);
    }
    Ok((lo, hi))
}

/// Largest cell-gradient magnitude over all fields.
pub fn gradient_bound(fields: &[&Field]) -> Result<f64> {
    if fields.is_empty() {
        return Err(invalid("gradient_bound needs at least one field"));
    }
    Ok(fields
        .iter()
        .flat_map(|f| gradient(f))
        .fold(0.0_f64, |m, s| m.max(s.abs())))
}

/// The four solved auxiliary fields of one configuration.
#[derive(Debug, Clone)]
pub struct AuxiliaryFields {
    pub system: SystemKind,
    /// `ξ_i` or `z_i`.
    pub plain: [Field; 2],
    /// `ξ_{i,δ}` or `z_{i,δ}`.
    pub layered: [Field; 2],
    /// Snapped layer width.
    pub delta: f64,
    /// Gradient bound over all four fields.
    pub grad_bound: f64,
}

impl AuxiliaryFields {
    pub fn solve(config: &ExponentConfig, grid: &Arc<Grid>, delta: f64) -> Result<AuxiliaryFields> {
        config.validate()?;
        let delta = grid.snap_delta(delta)?;
        let (plain_kind, layered_kind) = AuxKind::pair(config.system);
        let jobs = [(plain_kind, 0), (plain_kind, 1), (layered_kind, 0), (layered_kind, 1)];
        let mut solved: Vec<Field> = jobs
            .par_iter()
            .map(|&(kind, i)| solve_auxiliary(config, grid, kind, i, delta))
            .collect::<Result<_>>()?;
        let l1 = solved.pop().unwrap();
        let l0 = solved.pop().unwrap();
        let p1 = solved.pop().unwrap();
        let p0 = solved.pop().unwrap();
        let grad_bound = gradient_bound(&[&p0, &p1, &l0, &l1])?;
        Ok(AuxiliaryFields { system: config.system, plain: [p0, p1], layered: [l0, l1], delta, grad_bound })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.plain[0].grid()
    }

    /// `(c_lo, c_hi)`: the smallest ratio of a layered field to `d` and the
    /// largest ratio of a plain field to `d`.
    pub fn envelope(&self) -> Result<(f64, f64)> {
        let d = distance_field(self.grid());
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for i in 0..2 {
            lo = lo.min(estimate_envelope(&self.layered[i], &d)?.0);
            hi = hi.max(estimate_envelope(&self.plain[i], &d)?.1);
        }
        Ok((lo, hi))
    }
}

/// A failed comparison inequality; `margin > 0` is the amount of failure.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub node: usize,
    /// `sub1`, `sub2`, `sup1` or `sup2`.
    pub name: String,
    pub margin: f64,
}

/// Signed margins (`> 0` means failure) of the sub- and supersolution
/// inequalities at every interior node for multiplier `c`.
///
/// Left sides come from homogeneity, `-Δ_p(C^{±1} v) = C^{±(p-1)} · (rhs of v)`.
/// Right sides take the worst rectangle corner for `w₁^{α}w₂^{β}`. The
/// convective supersolution side also carries the bound
/// `|∇ū₁|^{γ₁} + (1+|∇w₂|)^{θ₁} <= 1 + (M C)^{γ₁}` (and its mirror), so that the
/// upper barrier satisfies the full inequality rather than only the reaction
/// part.
pub fn inequality_margins(config: &ExponentConfig, aux: &AuxiliaryFields, c: f64) -> Vec<(usize, String, f64)> {
    let grid = aux.grid();
    let (plain_kind, layered_kind) = AuxKind::pair(config.system);
    let m = aux.grad_bound;
    let mut out = Vec::new();
    for j in grid.free_nodes() {
        let x = grid.nodes()[j];
        let lower = [aux.layered[0].values()[j] / c, aux.layered[1].values()[j] / c];
        let upper = [c * aux.plain[0].values()[j], c * aux.plain[1].values()[j]];
        for i in 0..2 {
            let (a, b) = (config.alpha[i], config.beta[i]);
            let pick = |e: f64, k: usize, want_small: bool| {
                // w^e is increasing in w for e >= 0
                if (e >= 0.0) == want_small {
                    lower[k]
                } else {
                    upper[k]
                }
            };
            let corner = |want_small: bool| -> f64 {
                match (power(pick(a, 0, want_small), a), power(pick(b, 1, want_small), b)) {
                    (Ok(u), Ok(v)) => u * v,
                    _ => f64::NAN,
                }
            };
            let pm1 = config.p[i] - 1.0;
            let sub_lhs = c.powf(-pm1) * auxiliary_rhs(config, layered_kind, i, aux.delta).value_at(grid, x);
            let sup_lhs = c.powf(pm1) * auxiliary_rhs(config, plain_kind, i, aux.delta).value_at(grid, x);
            let (sub_rhs, sup_rhs) = match config.system {
                SystemKind::Convective => {
                    let own = if i == 0 { config.gamma[0] } else { config.theta[1] };
                    (corner(true), corner(false) + 1.0 + power(m * c, own).unwrap_or(f64::INFINITY))
                }
                SystemKind::Absorption => {
                    let absorbed = power(m / c, config.eta[i]).unwrap_or(f64::INFINITY);
                    (corner(true) - absorbed, corner(false))
                }
            };
            let fail = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
            out.push((j, format!("sub{}", i + 1), fail(sub_lhs - sub_rhs)));
            out.push((j, format!("sup{}", i + 1), fail(sup_rhs - sup_lhs)));
        }
    }
    out
}

/// Every node and inequality that fails at multiplier `c`; empty means pass.
pub fn check_prop_inequalities(config: &ExponentConfig, aux: &AuxiliaryFields, c: f64) -> Vec<Violation> {
    inequality_margins(config, aux, c)
        .into_iter()
        .filter(|(_, _, margin)| *margin > 0.0)
        .map(|(node, name, margin)| Violation { node, name, margin })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BarrierPair {
    pub system: SystemKind,
    pub lower: [Field; 2],
    pub upper: [Field; 2],
    pub c: f64,
    pub delta: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    pub grad_bound: f64,
}

impl BarrierPair {
    /// Scales the auxiliary fields by `c`.
    pub fn assemble(aux: &AuxiliaryFields, c: f64) -> Result<BarrierPair> {
        if !(c > 1.0) || !c.is_finite() {
            return Err(invalid(format!("C must exceed 1, got {c}")));
        }
        let (c_lo, c_hi) = aux.envelope()?;
        Ok(BarrierPair {
            system: aux.system,
            lower: [aux.layered[0].scaled(1.0 / c), aux.layered[1].scaled(1.0 / c)],
            upper: [aux.plain[0].scaled(c), aux.plain[1].scaled(c)],
            c,
            delta: aux.delta,
            c_lo,
            c_hi,
            grad_bound: aux.grad_bound,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.lower[0].grid()
    }

    /// `(lower_i + upper_i) / 2`.
    pub fn midpoint(&self, i: usize) -> Field {
        let values = self.lower[i]
            .values()
            .iter()
            .zip(self.upper[i].values())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Field::new(self.grid().clone(), values, true).expect("barriers vanish on the boundary")
    }

    /// `key = value` lines: `C`, `delta`, `c_lo`, `c_hi`, `grad_bound`, `system`.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "C = {}", fmt_f64(self.c));
        let _ = writeln!(s, "delta = {}", fmt_f64(self.delta));
        let _ = writeln!(s, "c_lo = {}", fmt_f64(self.c_lo));
        let _ = writeln!(s, "c_hi = {}", fmt_f64(self.c_hi));
        let _ = writeln!(s, "grad_bound = {}", fmt_f64(self.grad_bound));
        let _ = writeln!(s, "system = {}", self.system.name());
        s
    }

    /// `(file name, contents)` for the four barrier CSVs and the manifest.
    pub fn export(&self) -> Vec<(String, String)> {
        vec![
            ("lower1.csv".into(), self.lower[0].to_csv()),
            ("lower2.csv".into(), self.lower[1].to_csv()),
            ("upper1.csv".into(), self.upper[0].to_csv()),
            ("upper2.csv".into(), self.upper[1].to_csv()),
            ("barriers.txt".into(), self.manifest()),
        ]
    }
}

fn worst(violations: &[Violation], c: f64) -> CalibrationDiagnostic {
    let w = violations
        .iter()
        .max_by(|a, b| a.margin.total_cmp(&b.margin))
        .expect("nonempty violation list");
    CalibrationDiagnostic {
        c_tried: c,
        node: w.node,
        inequality: w.name.clone(),
        margin: w.margin,
        violations: violations.len(),
    }
}

/// Smallest `C` in `(1, c_max]` (to relative width `1e-3`) at which every
/// inequality holds, found by doubling from `min(2, c_max)` and bisecting.
pub fn calibrate_c(
    config: &ExponentConfig,
    grid: &Arc<Grid>,
    delta: f64,
    c_max: f64,
    n_bisect: usize,
) -> Result<BarrierPair> {
    let aux = AuxiliaryFields::solve(config, grid, delta)?;
    calibrate_with(config, &aux, c_max, n_bisect)
}

/// [`calibrate_c`] on already solved auxiliary fields.
pub fn calibrate_with(config: &ExponentConfig, aux: &AuxiliaryFields, c_max: f64, n_bisect: usize) -> Result<BarrierPair> {
    if !(c_max > 1.0) || c_max.is_nan() {
        return Err(invalid(format!("c_max must exceed 1, got {c_max}")));
    }
    // envelope first: a degenerate layered field is reported as such
    aux.envelope()?;
    let feasible = |c: f64| check_prop_inequalities(config, aux, c);
    let mut hi = c_max.min(2.0);
    let mut lo = 1.0;
    loop {
        let v = feasible(hi);
        if v.is_empty() {
            break;
        }
        if hi >= c_max {
            return Err(Error::CalibrationFailure { c_max, diagnostic: worst(&v, hi) });
        }
        lo = hi;
        hi = (2.0 * hi).min(c_max);
    }
    for _ in 0..n_bisect {
        if (hi - lo) <= C_REL_WIDTH * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if feasible(mid).is_empty() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    BarrierPair::assemble(aux, hi)
}
