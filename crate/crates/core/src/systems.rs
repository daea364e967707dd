//! The convective and absorption systems: exponent records, admissibility
//! predicates, pointwise nonlinearities, the growth envelope and truncation.
//!
//! Powers follow the convention `t^0 = 1` for every `t >= 0`, including
//! `t = 0`, which matters at critical points of the iterates.

use crate::barriers::BarrierPair;
use crate::domain::Field;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// `-Δ_{p₁}u₁ = u₁^{α₁}u₂^{β₁} + |∇u₁|^{γ₁} + (1+|∇u₂|)^{θ₁}` and the
    /// mirrored second equation.
    Convective,
    /// `-Δ_{p_i}u_i = u₁^{α_i}u₂^{β_i} - |∇u_i|^{η_i}`.
    Absorption,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Convective => "convective",
            SystemKind::Absorption => "absorption",
        }
    }
}

impl std::str::FromStr for SystemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "convective" => Ok(SystemKind::Convective),
            "absorption" => Ok(SystemKind::Absorption),
            other => Err(format!("unknown system kind '{other}'")),
        }
    }
}

/// Exponents of one system. Components are indexed `0` and `1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentConfig {
    pub system: SystemKind,
    pub n: usize,
    pub p: [f64; 2],
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    /// Convective only.
    pub gamma: [f64; 2],
    /// Convective only.
    pub theta: [f64; 2],
    /// Absorption only.
    pub eta: [f64; 2],
    pub r: [f64; 2],
}

/// `x' = x / (x - 1)`.
pub fn conjugate(x: f64) -> f64 {
    x / (x - 1.0)
}

impl ExponentConfig {
    /// All nonlinearity exponents zero and `r_i = p_i'`.
    pub fn new(system: SystemKind, n: usize, p: [f64; 2]) -> ExponentConfig {
        ExponentConfig {
            system,
            n,
            p,
            alpha: [0.0; 2],
            beta: [0.0; 2],
            gamma: [0.0; 2],
            theta: [0.0; 2],
            eta: [0.0; 2],
            r: [conjugate(p[0]), conjugate(p[1])],
        }
    }

    /// `μ_i = α_i + β_i`, the exponent of the boundary weight.
    pub fn mu(&self, i: usize) -> f64 {
        self.alpha[i] + self.beta[i]
    }

    /// Exponents of `(|∇u₁|, |∇u₂|)` in the growth hypothesis for equation `i`.
    pub fn gradient_exponents(&self, i: usize) -> [Option<f64>; 2] {
        match self.system {
            SystemKind::Convective if i == 0 => [Some(self.gamma[0]), Some(self.theta[0])],
            SystemKind::Convective => [Some(self.gamma[1]), Some(self.theta[1])],
            SystemKind::Absorption if i == 0 => [Some(self.eta[0]), None],
            SystemKind::Absorption => [None, Some(self.eta[1])],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!("N must be >= 2, got {}", self.n)));
        }
        let all = self
            .p
            .iter()
            .chain(&self.alpha)
            .chain(&self.beta)
            .chain(&self.gamma)
            .chain(&self.theta)
            .chain(&self.eta)
            .chain(&self.r);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite exponent"));
        }
        for i in 0..2 {
            if !(self.p[i] > 1.0 && self.p[i] < self.n as f64) {
                return Err(invalid(format!("p{} = {} must lie in (1, N = {})", i + 1, self.p[i], self.n)));
            }
            if !(self.r[i] > 0.0) {
                return Err(invalid(format!("r{} must be positive", i + 1)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Needed by both regimes.
    Common,
    /// Weak-solution regime only.
    Weak,
    /// C^{1,σ} regime only.
    C1,
}

/// One inequality `lhs < rhs` (or `lhs <= rhs`).
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub regime: Regime,
}

impl Condition {
    pub fn holds(&self) -> bool {
        if self.strict {
            self.lhs < self.rhs
        } else {
            self.lhs <= self.rhs
        }
    }

    /// `rhs - lhs`; nonnegative when the condition holds (positive if strict).
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn relation(&self) -> &'static str {
        if self.strict {
            "<"
        } else {
            "<="
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub admissible_w: bool,
    pub admissible_c1: bool,
    pub conditions: Vec<Condition>,
    pub violated: Vec<Condition>,
}

/// Evaluates every exponent condition of the chosen system. The weak and
/// `C^{1,σ}` verdicts are independent: each requires the common conditions
/// plus its own bound on `r_i`.
pub fn check_admissibility(config: &ExponentConfig) -> Result<AdmissibilityReport> {
    config.validate()?;
    let mut c = Vec::new();
    let mut push = |name: String, lhs: f64, rhs: f64, strict: bool, regime: Regime| {
        c.push(Condition { name, lhs, rhs, strict, regime });
    };
    let n = config.n as f64;
    for i in 0..2 {
        let k = i + 1;
        let (p, a, b, r) = (config.p[i], config.alpha[i], config.beta[i], config.r[i]);
        let abs_sum = a.abs() + b.abs();
        push(format!("reaction.growth{k}"), abs_sum, p - 1.0, true, Regime::Common);
        push(format!("reaction.sum{k}"), -1.0 / r, a + b, true, Regime::Common);
        let p_star = n * p / (n - p);
        push(format!("r.lower{k}"), conjugate(p_star) / conjugate(p), r, false, Regime::Common);
        push(format!("r.weak{k}"), conjugate(p), r, false, Regime::Weak);
        push(format!("r.c1_{k}"), n, r, true, Regime::C1);
    }
    match config.system {
        SystemKind::Convective => {
            push("convection.gamma2_sign".into(), config.gamma[1], 0.0, false, Regime::Common);
            push("convection.theta1_sign".into(), config.theta[0], 0.0, false, Regime::Common);
            push("convection.gamma1_sign".into(), 0.0, config.gamma[0], false, Regime::Common);
            push("convection.theta2_sign".into(), 0.0, config.theta[1], false, Regime::Common);
            let bound = |i: usize| (config.p[i] - 1.0) / config.r[i];
            push("convection.gamma1_bound".into(), config.gamma[0], bound(0), true, Regime::Common);
            push("convection.theta2_bound".into(), config.theta[1], bound(1), true, Regime::Common);
        }
        SystemKind::Absorption => {
            for i in 0..2 {
                let k = i + 1;
                let abs_sum = config.alpha[i].abs() + config.beta[i].abs();
                let eta = config.eta[i];
                push(format!("absorption.lower{k}"), abs_sum, eta, false, Regime::Common);
                let bound = (config.p[i] - 1.0) / config.r[i];
                push(format!("absorption.upper{k}"), eta, bound, true, Regime::Common);
            }
        }
    }
    let ok = |regime: Regime| {
        c.iter().filter(|x| x.regime == Regime::Common || x.regime == regime).all(Condition::holds)
    };
    let admissible_w = ok(Regime::Weak);
    let admissible_c1 = ok(Regime::C1);
    let violated = c.iter().filter(|x| !x.holds()).cloned().collect();
    Ok(AdmissibilityReport { admissible_w, admissible_c1, conditions: c, violated })
}

/// `t^e` with `t^0 = 1`; a nonpositive base with a negative exponent (or a
/// negative base with any nonzero exponent) is a [`Error::Singularity`].
pub fn power(t: f64, e: f64) -> Result<f64> {
    if e == 0.0 {
        return Ok(1.0);
    }
    if t < 0.0 || (t == 0.0 && e < 0.0) {
        return Err(Error::Singularity { value: t, exponent: e });
    }
    Ok(t.powf(e))
}

/// Right-hand sides `(f₁, f₂)` at one point. `s_i` are the values and `g_i`
/// the gradient magnitudes; `d_at_x` is accepted for symmetry with the growth
/// envelope and does not enter the nonlinearities.
pub fn eval_f(config: &ExponentConfig, _d_at_x: f64, s1: f64, s2: f64, g1: f64, g2: f64) -> Result<(f64, f64)> {
    let reaction = |i: usize| -> Result<f64> { Ok(power(s1, config.alpha[i])? * power(s2, config.beta[i])?) };
    match config.system {
        SystemKind::Convective => {
            let f1 = reaction(0)? + power(g1, config.gamma[0])? + power(1.0 + g2, config.theta[0])?;
            let f2 = reaction(1)? + power(1.0 + g1, config.gamma[1])? + power(g2, config.theta[1])?;
            Ok((f1, f2))
        }
        SystemKind::Absorption => {
            let f1 = reaction(0)? - power(g1, config.eta[0])?;
            let f2 = reaction(1)? - power(g2, config.eta[1])?;
            Ok((f1, f2))
        }
    }
}

/// `a^e` maximized over `a ∈ [lo, hi]` (`lo > 0`).
fn corner_max(lo: f64, hi: f64, e: f64) -> f64 {
    if e >= 0.0 {
        hi.powf(e)
    } else {
        lo.powf(e)
    }
}

/// Constant `M_i` of the growth hypothesis for equation `i`, derived from the
/// envelope `C^{-1} c_lo d <= lower`, `upper <= C c_hi d`:
/// `s₁^{α}s₂^{β} <= K · d^{α+β}` on the rectangle, and `M_i = max(K, 1)` also
/// covers the gradient terms.
pub fn growth_constant(config: &ExponentConfig, barriers: &BarrierPair, i: usize) -> Result<f64> {
    check_calibrated(barriers)?;
    let c = barriers.c;
    let lo = barriers.c_lo / c;
    let hi = barriers.c_hi * c;
    let k = corner_max(lo, hi, config.alpha[i]) * corner_max(lo, hi, config.beta[i]);
    Ok(k.max(1.0))
}

fn check_calibrated(barriers: &BarrierPair) -> Result<()> {
    let ok = barriers.c > 1.0
        && barriers.c.is_finite()
        && barriers.c_lo > 0.0
        && barriers.c_hi.is_finite()
        && barriers.c_hi >= barriers.c_lo;
    if ok {
        Ok(())
    } else {
        Err(invalid("barrier pair is not calibrated"))
    }
}

/// `M_i (d^{μ_i} + g₁^{γ̂_i} + g₂^{θ̂_i})`, dominating `|f_i|` whenever the
/// values lie in the barrier rectangle at a point with distance `d_at_x`. The
/// absorption system carries only the own-gradient term `g_i^{η_i}`.
pub fn growth_envelope(
    config: &ExponentConfig,
    barriers: &BarrierPair,
    d_at_x: f64,
    g1: f64,
    g2: f64,
) -> Result<(f64, f64)> {
    if !(d_at_x > 0.0) {
        return Err(invalid(format!("growth envelope needs d > 0, got {d_at_x}")));
    }
    let mut out = [0.0; 2];
    for (i, slot) in out.iter_mut().enumerate() {
        let m = growth_constant(config, barriers, i)?;
        let [e1, e2] = config.gradient_exponents(i);
        let mut total = d_at_x.powf(config.mu(i));
        if let Some(e) = e1 {
            total += power(g1, e)?;
        }
        if let Some(e) = e2 {
            total += power(g2, e)?;
        }
        *slot = m * total;
    }
    Ok((out[0], out[1]))
}

/// Nodewise `min(max(z, lower), upper)`.
pub fn truncate(z: &Field, lower: &Field, upper: &Field) -> Result<Field> {
    z.check_same_grid(lower)?;
    z.check_same_grid(upper)?;
    let (l, u) = (lower.values(), upper.values());
    if let Some(j) = (0..l.len()).find(|&j| l[j] > u[j]) {
        return Err(Error::RectangleViolation { node: j, lower: l[j], upper: u[j] });
    }
    let values = z.values().iter().zip(l.iter().zip(u)).map(|(&v, (&a, &b))| v.max(a).min(b)).collect();
    Field::new(z.grid().clone(), values, lower.dirichlet_zero() && upper.dirichlet_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DomainKind, Grid};

    fn example_convective() -> ExponentConfig {
        let mut c = ExponentConfig::new(SystemKind::Convective, 3, [2.0, 2.0]);
        c.alpha = [-0.2, -0.1];
        c.beta = [-0.2, -0.1];
        c.gamma = [0.25, 0.0];
        c.theta = [0.0, 0.25];
        c.r = [2.0, 2.0];
        c
    }

    #[test]
    fn convective_example_is_admissible() {
        let rep = check_admissibility(&example_convective()).unwrap();
        assert!(rep.admissible_w, "{:?}", rep.violated);
        assert!(!rep.admissible_c1);
        assert!(rep.violated.iter().all(|v| v.regime == Regime::C1));
    }

    #[test]
    fn sum_below_minus_one_over_r_is_rejected() {
        let mut c = example_convective();
        c.alpha[0] = -0.3;
        c.beta[0] = -0.3;
        let rep = check_admissibility(&c).unwrap();
        assert!(!rep.admissible_w);
        let v = rep.violated.iter().find(|v| v.name == "reaction.sum1").unwrap();
        assert_eq!((v.lhs, v.rhs), (-0.5, -0.6));
    }

    #[test]
    fn boundary_value_is_rejected() {
        let mut c = example_convective();
        c.alpha[0] = -0.25;
        c.beta[0] = -0.25;
        assert!(!check_admissibility(&c).unwrap().admissible_w);
    }

    #[test]
    fn absorption_example_is_admissible() {
        let mut c = ExponentConfig::new(SystemKind::Absorption, 3, [2.0, 2.0]);
        c.eta = [0.25, 0.25];
        c.r = [2.0, 2.0];
        assert!(check_admissibility(&c).unwrap().admissible_w);
        c.eta[1] = 0.5;
        let rep = check_admissibility(&c).unwrap();
        assert!(!rep.admissible_w);
        assert!(rep.violated.iter().any(|v| v.name == "absorption.upper2" && v.regime == Regime::Common));
    }

    #[test]
    fn c1_regime_needs_r_above_n() {
        let mut c = example_convective();
        c.r = [3.5, 3.5];
        c.alpha[0] = -0.1;
        c.beta[0] = -0.1;
        c.gamma[0] = 0.2;
        c.theta[1] = 0.2;
        let rep = check_admissibility(&c).unwrap();
        assert!(rep.admissible_c1 && rep.admissible_w);
    }

    #[test]
    fn malformed_configs_are_rejected() {
        let c = ExponentConfig::new(SystemKind::Convective, 2, [2.0, 1.5]);
        assert!(check_admissibility(&c).is_err());
        let c = ExponentConfig::new(SystemKind::Convective, 3, [1.0, 1.5]);
        assert!(check_admissibility(&c).is_err());
    }

    #[test]
    fn eval_f_examples() {
        let c = ExponentConfig::new(SystemKind::Convective, 3, [2.0, 2.0]);
        assert_eq!(eval_f(&c, 0.3, 0.7, 2.0, 0.0, 5.0).unwrap(), (3.0, 3.0));
        let c = example_convective();
        let (f1, _) = eval_f(&c, 0.1, 0.25, 0.25, 1.0, 7.0).unwrap();
        assert!((f1 - (0.25f64.powf(-0.4) + 2.0)).abs() < 1e-14);
        assert!((f1 - 3.741101).abs() < 1e-6);
        let mut a = ExponentConfig::new(SystemKind::Absorption, 3, [2.0, 2.0]);
        a.eta[0] = 0.25;
        assert!((eval_f(&a, 0.1, 1.0, 1.0, 16.0, 0.0).unwrap().0 + 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_f_outside_the_cone() {
        let c = example_convective();
        assert!(matches!(eval_f(&c, 0.1, 0.0, 1.0, 0.0, 0.0), Err(Error::Singularity { .. })));
        assert!(matches!(eval_f(&c, 0.1, 1.0, -1.0, 0.0, 0.0), Err(Error::Singularity { .. })));
        assert_eq!(power(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(power(0.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn truncation() {
        let g = Grid::build(DomainKind::Interval01, 8, 1.0, 2).unwrap();
        let lower = Field::from_fn(&g, true, |x| 0.5 * x * (1.0 - x));
        let upper = Field::from_fn(&g, true, |x| 2.0 * x * (1.0 - x));
        let inside = Field::from_fn(&g, true, |x| x * (1.0 - x));
        assert_eq!(truncate(&inside, &lower, &upper).unwrap().values(), inside.values());
        let below = Field::from_fn(&g, false, |_| -5.0);
        assert_eq!(truncate(&below, &lower, &upper).unwrap().values(), lower.values());
        let above = Field::from_fn(&g, false, |_| 5.0);
        assert_eq!(truncate(&above, &lower, &upper).unwrap().values(), upper.values());
        assert!(matches!(truncate(&inside, &upper, &lower), Err(Error::RectangleViolation { .. })));
    }
}
