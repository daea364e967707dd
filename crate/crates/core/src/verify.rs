//! A-posteriori checks recomputed from raw fields: weak residuals of the
//! untruncated system, localization in the barrier rectangle, positivity, a
//! regularity proxy and an empirical Hardy–Sobolev constant.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::barriers::BarrierPair;
use crate::domain::{distance_field, fmt_f64, gradient, integrate_fn, nodal_gradient_magnitude, norms, Field, Grid};
use crate::error::{invalid, Result};
use crate::fixedpoint::{track_apriori, SolveReport};
use crate::plap::{self, PlapProblem, Rhs};
use crate::systems::{eval_f, ExponentConfig};

pub const LOCALIZATION_THRESHOLD: f64 = 1e-8;
/// Exponent of the Hölder quotient probe.
pub const HOLDER_PROBE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Verdict {
    /// `pass` is `measured <= threshold`.
    pub fn new(name: impl Into<String>, measured: f64, threshold: f64, detail: impl Into<String>) -> Verdict {
        Verdict {
            name: name.into(),
            pass: measured <= threshold,
            measured,
            threshold,
            detail: detail.into().replace(',', ";"),
        }
    }
}

/// CSV with header `name,pass,measured,threshold,detail`.
pub fn verdicts_to_csv(verdicts: &[Verdict]) -> String {
    let mut s = String::from("name,pass,measured,threshold,detail\n");
    for v in verdicts {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            v.name,
            v.pass,
            fmt_f64(v.measured),
            fmt_f64(v.threshold),
            v.detail
        );
    }
    s
}

/// Weak residual of each equation of the original system at `(u₁, u₂)`, with
/// the right-hand side assembled nodally from `u` itself.
pub fn weak_solution_check(
    config: &ExponentConfig,
    barriers: &BarrierPair,
    u1: &Field,
    u2: &Field,
    tol: f64,
) -> Result<(Verdict, Verdict)> {
    u1.check_same_grid(u2)?;
    u1.check_same_grid(&barriers.lower[0])?;
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
    let mut out = Vec::with_capacity(2);
    for (i, (u, fi)) in [u1, u2].into_iter().zip(f).enumerate() {
        let rhs = Field::new(grid.clone(), fi, true)?;
        let problem = PlapProblem::new(grid.clone(), config.p[i], Rhs::Nodal(rhs))?;
        let r = plap::weak_residual(&problem, u)?;
        out.push(Verdict::new(format!("weak_residual{}", i + 1), r, tol, "normalized hat-function residual"));
    }
    let second = out.pop().unwrap();
    Ok((out.pop().unwrap(), second))
}

/// Largest excursion of `u_i` outside `[lower_i, upper_i]`.
pub fn localization_check(u1: &Field, u2: &Field, barriers: &BarrierPair) -> Result<Verdict> {
    let mut worst = 0.0_f64;
    let mut at = (0, 0);
    for (i, u) in [u1, u2].into_iter().enumerate() {
        u.check_same_grid(&barriers.lower[i])?;
        let (l, h) = (barriers.lower[i].values(), barriers.upper[i].values());
        for (j, &v) in u.values().iter().enumerate() {
            let e = (l[j] - v).max(v - h[j]);
            if e > worst {
                worst = e;
                at = (i + 1, j);
            }
        }
    }
    let detail = if worst > 0.0 {
        format!("worst at component {} node {}", at.0, at.1)
    } else {
        "inside the rectangle".to_string()
    };
    Ok(Verdict::new("localization", worst, LOCALIZATION_THRESHOLD, detail))
}

/// Number of interior nodes where `u <= 0`.
pub fn positivity_check(u: &Field, name: &str) -> Verdict {
    let grid = u.grid();
    let bad: Vec<usize> = grid.free_nodes().filter(|&j| !(u.values()[j] > 0.0)).collect();
    let detail = match bad.first() {
        Some(j) => format!("first nonpositive node {j}"),
        None => "strictly positive".to_string(),
    };
    Verdict::new(name, bad.len() as f64, 0.0, detail)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityRecord {
    pub sup_grad: f64,
    pub holder_quotient: f64,
    pub dm_bound_ratio: f64,
}

/// `L^r` norm of the piecewise-linear interpolant of `f`.
pub fn lr_norm(f: &Field, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid(format!("norm exponent must be positive, got {r}")));
    }
    let total = integrate_fn(f.grid(), None, |x| f.interpolate(x).abs().powf(r))?;
    Ok(total.powf(1.0 / r))
}

/// Discrete stand-in for `C^{1,σ}` regularity of component `i`: the sup of the
/// cell gradients, the largest Hölder quotient of adjacent cell gradients with
/// exponent 1/2 (distance between cell midpoints), and the ratio of the sup
/// gradient to `‖rhs‖_{L^{r_i}}^{1/(p_i-1)}`.
pub fn regularity_proxy(u: &Field, config: &ExponentConfig, i: usize, rhs: &Field) -> Result<RegularityRecord> {
    u.check_same_grid(rhs)?;
    let grid = u.grid();
    let g = gradient(u);
    let sup_grad = g.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let mut holder_quotient = 0.0_f64;
    for c in 0..g.len() - 1 {
        let mid = |k: usize| {
            let (a, b) = grid.cell(k);
            0.5 * (a + b)
        };
        let dist = mid(c + 1) - mid(c);
        holder_quotient = holder_quotient.max((g[c + 1] - g[c]).abs() / dist.powf(HOLDER_PROBE));
    }
    let norm = lr_norm(rhs, config.r[i])?;
    let dm_bound_ratio = if norm > 0.0 { sup_grad / norm.powf(1.0 / (config.p[i] - 1.0)) } else { 0.0 };
    Ok(RegularityRecord { sup_grad, holder_quotient, dm_bound_ratio })
}

/// Hat functions peaked near several distances from the boundary, the
/// torsion function for `p` and the distance function.
pub fn standard_probes(grid: &Arc<Grid>, p: f64) -> Result<Vec<Field>> {
    let mut probes = Vec::new();
    let free: Vec<usize> = grid.free_nodes().collect();
    let mut picked: Vec<usize> = Vec::new();
    for target in [0.02, 0.05, 0.1, 0.2, 0.4] {
        let j = *free
            .iter()
            .min_by(|&&a, &&b| {
                let da = (grid.distance(grid.nodes()[a]) - target).abs();
                let db = (grid.distance(grid.nodes()[b]) - target).abs();
                da.total_cmp(&db)
            })
            .expect("grid has interior nodes");
        if !picked.contains(&j) {
            picked.push(j);
            let mut v = vec![0.0; grid.n_nodes()];
            v[j] = 1.0;
            probes.push(Field::new(grid.clone(), v, true)?);
        }
    }
    let one = Field::from_fn(grid, false, |_| 1.0);
    let torsion = plap::solve(&PlapProblem::new(grid.clone(), p, Rhs::Nodal(one))?)?.u;
    probes.push(torsion);
    probes.push(distance_field(grid));
    Ok(probes)
}

/// `max over probes of ∫ d^μ u / ‖∇u‖_p`, an empirical lower bound for the
/// Hardy–Sobolev constant. Accepts `μ ∈ (-1 + 1/p, 0]`.
pub fn hardy_sobolev_diagnostic(grid: &Grid, mu: f64, p: f64, probes: &[Field]) -> Result<f64> {
    if !(p > 1.0) {
        return Err(invalid(format!("p must exceed 1, got {p}")));
    }
    if !(mu > -1.0 + 1.0 / p && mu <= 0.0) {
        return Err(invalid(format!("mu = {mu} outside (-1 + 1/p, 0] for p = {p}")));
    }
    if probes.is_empty() {
        return Err(invalid("no probe fields"));
    }
    let mut best = 0.0_f64;
    for u in probes {
        if u.grid().kind() != grid.kind() || u.grid().nodes() != grid.nodes() {
            return Err(crate::Error::GridMismatch);
        }
        let denom = norms(u, p)?.lp_gradient;
        if denom == 0.0 {
            return Err(invalid("probe field has zero gradient"));
        }
        let num = integrate_fn(grid, Some(mu), |x| u.interpolate(x))?;
        best = best.max(num / denom);
    }
    Ok(best)
}

/// The verdicts reported for a finished iteration: weak residuals,
/// localization, positivity of both components and boundedness of the
/// gradient norms along the run.
pub fn verify_report(
    config: &ExponentConfig,
    barriers: &BarrierPair,
    report: &SolveReport,
    residual_tol: f64,
) -> Result<Vec<Verdict>> {
    let [u1, u2] = &report.fields;
    let mut out = Vec::new();
    out.push(positivity_check(u1, "positivity1"));
    out.push(positivity_check(u2, "positivity2"));
    match weak_solution_check(config, barriers, u1, u2, residual_tol) {
        Ok((r1, r2)) => {
            out.push(r1);
            out.push(r2);
        }
        Err(crate::Error::Singularity { value, exponent }) => {
            for i in 1..=2 {
                out.push(Verdict::new(
                    format!("weak_residual{i}"),
                    f64::INFINITY,
                    residual_tol,
                    format!("singular nonlinearity at value {value} exponent {exponent}"),
                ));
            }
        }
        Err(e) => return Err(e),
    }
    out.push(localization_check(u1, u2, barriers)?);
    let apriori = track_apriori(&report.history)?;
    out.push(Verdict::new(
        "apriori_bounded",
        if apriori.bounded { 0.0 } else { 1.0 },
        0.0,
        format!("max sup gradients {:.6e} {:.6e}", apriori.max_sup_grad[0], apriori.max_sup_grad[1]),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainKind;

    #[test]
    fn verdict_pass_rule_and_csv() {
        let v = Verdict::new("x", 1.0, 1.0, "a,b");
        assert!(v.pass);
        assert!(!Verdict::new("y", 1.0 + 1e-16 * 4.0, 1.0, "").pass);
        let csv = verdicts_to_csv(&[v]);
        assert!(csv.starts_with("name,pass,measured,threshold,detail\nx,true,"));
        assert!(csv.trim_end().ends_with("a;b"));
    }

    #[test]
    fn regularity_examples() {
        let g = Grid::build(DomainKind::Interval01, 256, 1.0, 3).unwrap();
        let c = crate::systems::ExponentConfig::new(crate::systems::SystemKind::Convective, 3, [2.0, 2.0]);
        let u = Field::from_fn(&g, true, |x| x * (1.0 - x));
        let one = Field::from_fn(&g, false, |_| 1.0);
        let r = regularity_proxy(&u, &c, 0, &one).unwrap();
        assert!((r.sup_grad - (1.0 - 1.0 / 256.0)).abs() < 1e-12);
        let z = Field::zeros(&g);
        let r = regularity_proxy(&z, &c, 0, &z).unwrap();
        assert_eq!((r.sup_grad, r.holder_quotient, r.dm_bound_ratio), (0.0, 0.0, 0.0));
    }

    #[test]
    fn kink_blows_up_the_holder_quotient() {
        let c = crate::systems::ExponentConfig::new(crate::systems::SystemKind::Convective, 3, [2.0, 2.0]);
        let q = |n: usize| {
            let g = Grid::build(DomainKind::Interval01, n, 1.0, 3).unwrap();
            let d = distance_field(&g);
            regularity_proxy(&d, &c, 0, &d).unwrap().holder_quotient
        };
        assert!(q(256) > 1.9 * q(64));
    }

    #[test]
    fn hardy_sobolev_torsion_probe() {
        let g = Grid::build(DomainKind::Interval01, 512, 1.0, 3).unwrap();
        let u = Field::from_fn(&g, true, |x| x * (1.0 - x));
        let r = hardy_sobolev_diagnostic(&g, 0.0, 2.0, std::slice::from_ref(&u)).unwrap();
        let exact = (1.0 / 6.0) / (1.0f64 / 3.0).sqrt();
        assert!((r - exact).abs() < 1e-5, "{r} vs {exact}");
        assert!(hardy_sobolev_diagnostic(&g, -0.5, 2.0, std::slice::from_ref(&u)).is_err());
        assert!(hardy_sobolev_diagnostic(&g, 0.1, 2.0, &[u]).is_err());
        assert!(hardy_sobolev_diagnostic(&g, -0.2, 2.0, &[Field::zeros(&g)]).is_err());
    }

    #[test]
    fn localization_examples() {
        let g = Grid::build(DomainKind::Interval01, 32, 1.0, 3).unwrap();
        let c = crate::systems::ExponentConfig::new(crate::systems::SystemKind::Convective, 3, [2.0, 2.0]);
        let b = crate::barriers::calibrate_c(&c, &g, 0.1, 1e6, 40).unwrap();
        let v = localization_check(&b.lower[0], &b.lower[1], &b).unwrap();
        assert_eq!(v.measured, 0.0);
        let (m1, m2) = (b.midpoint(0), b.midpoint(1));
        assert_eq!(localization_check(&m1, &m2, &b).unwrap().measured, 0.0);
        let mut v = b.upper[0].values().to_vec();
        v[7] += 0.01;
        let bumped = Field::new(g.clone(), v, true).unwrap();
        let out = localization_check(&bumped, &b.upper[1], &b).unwrap();
        assert!((out.measured - 0.01).abs() < 1e-15 && !out.pass);
    }
}
