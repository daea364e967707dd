//! Line-oriented run configuration.
//!
//! ```text
//! # comments start with '#'
//! [system]
//! kind = convective      # or absorption
//! n = 3
//! p1 = 2
//! p2 = 2
//! alpha1 = -0.1          # also beta1, alpha2, beta2
//! gamma1 = 0.25          # gamma1/2, theta1/2: convective only
//! theta2 = 0.25
//! eta1 = 0.25            # eta1/2: absorption only
//! r1 = 2                 # defaults to the conjugate exponent of p1
//! r2 = 2
//!
//! [grid]
//! domain = radial        # radial (dimension n) or interval
//! cells = 256
//! grading = 2
//! quadrature = 3
//! delta = 0.1
//!
//! [solver]
//! tol = 1e-8
//! residual_tol = 1e-6
//! max_iter = 200
//! relaxation = 1
//! initial = midpoint     # lower, upper or midpoint
//! c_max = 1e6
//! n_bisect = 40
//! seed = 0
//! ```
//!
//! Every key is optional except `kind`, `n`, `p1` and `p2`. Unknown keys,
//! duplicate keys and keys outside a section are errors.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use crate::barriers::{DEFAULT_C_MAX, DEFAULT_N_BISECT};
use crate::domain::{DomainKind, Grid, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::fixedpoint::{Initial, IterateOptions, DEFAULT_MAX_ITER, DEFAULT_RESIDUAL_TOL, DEFAULT_TOL};
use crate::systems::{conjugate, ExponentConfig, SystemKind};

const SYSTEM_KEYS: [&str; 16] = [
    "kind", "n", "p1", "p2", "alpha1", "alpha2", "beta1", "beta2", "gamma1", "gamma2", "theta1", "theta2", "eta1",
    "eta2", "r1", "r2",
];
const GRID_KEYS: [&str; 5] = ["domain", "cells", "grading", "quadrature", "delta"];
const SOLVER_KEYS: [&str; 8] = ["tol", "residual_tol", "max_iter", "relaxation", "initial", "c_max", "n_bisect", "seed"];

/// Section a key belongs to, if any.
pub fn section_of(key: &str) -> Option<&'static str> {
    if SYSTEM_KEYS.contains(&key) {
        Some("system")
    } else if GRID_KEYS.contains(&key) {
        Some("grid")
    } else if SOLVER_KEYS.contains(&key) {
        Some("solver")
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainChoice {
    Interval,
    Radial,
}

impl FromStr for DomainChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interval" => Ok(DomainChoice::Interval),
            "radial" => Ok(DomainChoice::Radial),
            other => Err(format!("unknown domain '{other}'")),
        }
    }
}

impl DomainChoice {
    pub fn name(&self) -> &'static str {
        match self {
            DomainChoice::Interval => "interval",
            DomainChoice::Radial => "radial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSettings {
    pub domain: DomainChoice,
    pub cells: usize,
    pub grading: f64,
    pub quadrature: usize,
    pub delta: f64,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings { domain: DomainChoice::Radial, cells: 256, grading: 2.0, quadrature: 3, delta: DEFAULT_DELTA }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
    pub relaxation: f64,
    pub initial: Initial,
    pub c_max: f64,
    pub n_bisect: usize,
    pub seed: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: DEFAULT_TOL,
            residual_tol: DEFAULT_RESIDUAL_TOL,
            max_iter: DEFAULT_MAX_ITER,
            relaxation: 1.0,
            initial: Initial::Midpoint,
            c_max: DEFAULT_C_MAX,
            n_bisect: DEFAULT_N_BISECT,
            seed: 0,
        }
    }
}

impl SolverSettings {
    pub fn iterate_options(&self) -> IterateOptions {
        IterateOptions {
            initial: self.initial,
            relaxation: self.relaxation,
            max_iter: self.max_iter,
            tol: self.tol,
            residual_tol: self.residual_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub exponents: ExponentConfig,
    pub grid: GridSettings,
    pub solver: SolverSettings,
}

impl RunConfig {
    pub fn new(exponents: ExponentConfig) -> RunConfig {
        RunConfig { exponents, grid: GridSettings::default(), solver: SolverSettings::default() }
    }

    pub fn domain_kind(&self) -> DomainKind {
        match self.grid.domain {
            DomainChoice::Interval => DomainKind::Interval01,
            DomainChoice::Radial => DomainKind::RadialBall(self.exponents.n),
        }
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        Grid::build(self.domain_kind(), self.grid.cells, self.grid.grading, self.grid.quadrature)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut section: Option<&str> = None;
        let mut seen = HashSet::new();
        let mut config = RunConfig::new(ExponentConfig::new(SystemKind::Convective, 2, [2.0, 2.0]));

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| Error::Parse { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("malformed section header '{content}'")))?
                    .trim();
                match name {
                    "system" | "grid" | "solver" => section = Some(name),
                    other => return Err(err(format!("unknown section '{other}'"))),
                }
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', found '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.ok_or_else(|| err(format!("key '{key}' appears before any section")))?;
            if section_of(key) != Some(sec) {
                return Err(err(format!("unknown key '{key}' in [{sec}]")));
            }
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key '{key}' in [{sec}]")));
            }
            config.set(key, value).map_err(err)?;
        }

        let end = text.lines().count();
        for key in ["kind", "n", "p1", "p2"] {
            if !seen.contains(key) {
                return Err(Error::Parse { line: end, message: format!("missing required key '{key}' in [system]") });
            }
        }
        let e = &mut config.exponents;
        for (i, key) in ["r1", "r2"].into_iter().enumerate() {
            if !seen.contains(key) {
                e.r[i] = conjugate(e.p[i]);
            }
        }
        Ok(config)
    }

    /// Sets one key of any section from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let real = || value.parse::<f64>().map_err(|_| format!("'{key}' expects a number, found '{value}'"));
        let count =
            || value.parse::<usize>().map_err(|_| format!("'{key}' expects a nonnegative integer, found '{value}'"));
        let e = &mut self.exponents;
        let (g, v) = (&mut self.grid, &mut self.solver);
        match key {
            "kind" => e.system = SystemKind::from_str(value)?,
            "n" => e.n = count()?,
            "p1" => e.p[0] = real()?,
            "p2" => e.p[1] = real()?,
            "alpha1" => e.alpha[0] = real()?,
            "alpha2" => e.alpha[1] = real()?,
            "beta1" => e.beta[0] = real()?,
            "beta2" => e.beta[1] = real()?,
            "gamma1" => e.gamma[0] = real()?,
            "gamma2" => e.gamma[1] = real()?,
            "theta1" => e.theta[0] = real()?,
            "theta2" => e.theta[1] = real()?,
            "eta1" => e.eta[0] = real()?,
            "eta2" => e.eta[1] = real()?,
            "r1" => e.r[0] = real()?,
            "r2" => e.r[1] = real()?,
            "domain" => g.domain = DomainChoice::from_str(value)?,
            "cells" => g.cells = count()?,
            "grading" => g.grading = real()?,
            "quadrature" => g.quadrature = count()?,
            "delta" => g.delta = real()?,
            "tol" => v.tol = real()?,
            "residual_tol" => v.residual_tol = real()?,
            "max_iter" => v.max_iter = count()?,
            "relaxation" => v.relaxation = real()?,
            "initial" => v.initial = Initial::from_str(value)?,
            "c_max" => v.c_max = real()?,
            "n_bisect" => v.n_bisect = count()?,
            "seed" => {
                v.seed = value.parse().map_err(|_| format!("'seed' expects a nonnegative integer, found '{value}'"))?
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Text that [`RunConfig::parse`] reads back to the same value. Only the
    /// gradient exponents of the configured system are written.
    pub fn to_text(&self) -> String {
        let e = &self.exponents;
        let mut s = String::from("[system]\n");
        let _ = writeln!(s, "kind = {}", e.system.name());
        let _ = writeln!(s, "n = {}", e.n);
        let mut put = |k: &str, v: f64| {
            let _ = writeln!(s, "{k} = {v:?}");
        };
        put("p1", e.p[0]);
        put("p2", e.p[1]);
        put("alpha1", e.alpha[0]);
        put("beta1", e.beta[0]);
        put("alpha2", e.alpha[1]);
        put("beta2", e.beta[1]);
        match e.system {
            SystemKind::Convective => {
                put("gamma1", e.gamma[0]);
                put("gamma2", e.gamma[1]);
                put("theta1", e.theta[0]);
                put("theta2", e.theta[1]);
            }
            SystemKind::Absorption => {
                put("eta1", e.eta[0]);
                put("eta2", e.eta[1]);
            }
        }
        put("r1", e.r[0]);
        put("r2", e.r[1]);
        let g = &self.grid;
        let _ = write!(
            s,
            "\n[grid]\ndomain = {}\ncells = {}\ngrading = {:?}\nquadrature = {}\ndelta = {:?}\n",
            g.domain.name(),
            g.cells,
            g.grading,
            g.quadrature,
            g.delta
        );
        let v = &self.solver;
        let initial = match v.initial {
            Initial::Lower => "lower",
            Initial::Upper => "upper",
            Initial::Midpoint => "midpoint",
        };
        let _ = write!(
            s,
            "\n[solver]\ntol = {:?}\nresidual_tol = {:?}\nmax_iter = {}\nrelaxation = {:?}\ninitial = {}\nc_max = {:?}\nn_bisect = {}\nseed = {}\n",
            v.tol, v.residual_tol, v.max_iter, v.relaxation, initial, v.c_max, v.n_bisect, v.seed
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONVECTIVE: &str = "\
[system]
kind = convective
n = 3
p1 = 2
p2 = 2
alpha1 = -0.1
beta1 = -0.1
alpha2 = -0.1
beta2 = -0.1
gamma1 = 0.25
theta2 = 0.25
r1 = 2
r2 = 2

[grid]
domain = radial
cells = 256
grading = 2.0
";

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::parse(CONVECTIVE).unwrap();
        assert_eq!(c.exponents.system, SystemKind::Convective);
        assert_eq!(c.exponents.gamma, [0.25, 0.0]);
        assert_eq!(c.domain_kind(), DomainKind::RadialBall(3));
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        let mut d = c.clone();
        d.set("eta2", "0.3").unwrap();
        d.set("cells", "64").unwrap();
        assert_eq!((d.exponents.eta[1], d.grid.cells), (0.3, 64));
        assert!(d.set("cells", "-1").is_err() && d.set("speed", "1").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = CONVECTIVE.replace("p1 = 2", "p1 = banana");
        match RunConfig::parse(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let unknown = format!("{CONVECTIVE}\n[solver]\nspeed = 3\n");
        assert!(matches!(RunConfig::parse(&unknown), Err(Error::Parse { .. })));
        assert!(matches!(RunConfig::parse("p1 = 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(RunConfig::parse("[system]\nkind = convective\n"), Err(Error::Parse { .. })));
        let dup = CONVECTIVE.replace("n = 3", "n = 3\nn = 4");
        assert!(matches!(RunConfig::parse(&dup), Err(Error::Parse { line: 4, .. })));
        let misplaced = CONVECTIVE.replace("n = 3", "cells = 3");
        assert!(matches!(RunConfig::parse(&misplaced), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn r_defaults_to_conjugate() {
        let c = RunConfig::parse("[system]\nkind = absorption\nn = 3\np1 = 1.5\np2 = 2\n").unwrap();
        assert_eq!(c.exponents.r, [3.0, 2.0]);
    }
}
