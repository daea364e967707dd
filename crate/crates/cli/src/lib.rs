//! Config-driven driver for the sub-supersolution pipeline.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (admissible / converged and verified / sweep written) |
//! | 1 | exponents violate the weak-regime admissibility conditions |
//! | 2 | usage, parse or I/O error, including an unwritable output directory |
//! | 3 | no barrier multiplier found (calibration failure or degenerate barrier) |
//! | 4 | the fixed-point iteration or an inner solve did not converge |
//! | 5 | a verification verdict failed |

pub mod manifest;
pub mod svg;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use subsuper::barriers::{calibrate_c, BarrierPair};
use subsuper::config::RunConfig;
use subsuper::domain::{fmt_f64, Field};
use subsuper::fixedpoint::{iterate, SolveReport};
use subsuper::systems::{check_admissibility, eval_f, growth_envelope, AdmissibilityReport, ExponentConfig};
use subsuper::verify::{verdicts_to_csv, verify_report, Verdict};
use subsuper::Error;

use manifest::{content_hash, create_out_dir, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INADMISSIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CALIBRATION: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

/// Samples drawn for the envelope-domination verdict.
pub const ENVELOPE_SAMPLES: usize = 1000;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub cells: Option<usize>,
    pub grading: Option<f64>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(v) = self.cells {
            config.grid.cells = v;
        }
        if let Some(v) = self.grading {
            config.grid.grading = v;
        }
        if let Some(v) = self.delta {
            config.grid.delta = v;
        }
        if let Some(v) = self.seed {
            config.solver.seed = v;
        }
        if let Some(v) = self.max_iter {
            config.solver.max_iter = v;
        }
        if let Some(v) = self.tol {
            config.solver.tol = v;
        }
    }
}

fn read_config(path: &Path) -> Result<(String, RunConfig), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let config = RunConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((text, config))
}

/// Table of every admissibility condition with its slack.
pub fn admissibility_table(report: &AdmissibilityReport) -> String {
    let mut s = format!("{:<8} {:<22} {:>14} {:<3} {:>14} {:>14} {}\n", "regime", "condition", "lhs", "", "rhs", "slack", "status");
    for c in &report.conditions {
        let _ = writeln!(
            s,
            "{:<8} {:<22} {:>14.6e} {:<3} {:>14.6e} {:>14.6e} {}",
            format!("{:?}", c.regime).to_lowercase(),
            c.name,
            c.lhs,
            c.relation(),
            c.rhs,
            c.slack(),
            if c.holds() { "ok" } else { "VIOLATED" }
        );
    }
    let _ = writeln!(s, "admissible_w = {}", report.admissible_w);
    let _ = writeln!(s, "admissible_c1 = {}", report.admissible_c1);
    s
}

fn admissibility_csv(report: &AdmissibilityReport) -> String {
    let mut s = String::from("regime,condition,lhs,relation,rhs,slack,holds\n");
    for c in &report.conditions {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            format!("{:?}", c.regime).to_lowercase(),
            c.name,
            fmt_f64(c.lhs),
            c.relation(),
            fmt_f64(c.rhs),
            fmt_f64(c.slack()),
            c.holds()
        );
    }
    s
}

/// Prints the admissibility report. Writes a manifest and
/// `admissibility.csv` when `out_dir` is given.
pub fn cmd_admissible(config_path: &Path, out_dir: Option<&Path>, stdout: &mut dyn Write) -> i32 {
    let mut manifest = out_dir.map(|d| RunManifest::new("admissible", config_path, d));
    if let (Some(dir), Some(m)) = (out_dir, manifest.as_ref()) {
        if let Err(e) = create_out_dir(dir).and_then(|_| m.write(dir)) {
            let _ = writeln!(stdout, "error: cannot write to {}: {e}", dir.display());
            return EXIT_USAGE;
        }
    }
    let finish = |manifest: &mut Option<RunManifest>, status: &str, code: i32| {
        if let (Some(dir), Some(m)) = (out_dir, manifest.as_mut()) {
            if m.finish(dir, status, code).is_err() {
                return EXIT_USAGE;
            }
        }
        code
    };
    let (text, config) = match read_config(config_path) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stdout, "error: {e}");
            if let Some(m) = manifest.as_mut() {
                m.diagnostic.push(("error".into(), e));
            }
            return finish(&mut manifest, "parse_error", EXIT_USAGE);
        }
    };
    if let Some(m) = manifest.as_mut() {
        m.config_hash = content_hash(text.as_bytes());
        m.seed = config.solver.seed;
    }
    let report = match check_admissibility(&config.exponents) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stdout, "error: {}: {e}", config_path.display());
            if let Some(m) = manifest.as_mut() {
                m.diagnostic.push(("error".into(), e.to_string()));
            }
            return finish(&mut manifest, "invalid_config", EXIT_USAGE);
        }
    };
    let _ = write!(stdout, "{}", admissibility_table(&report));
    if !report.violated.is_empty() {
        let _ = writeln!(stdout, "violated:");
        for c in &report.violated {
            let _ = writeln!(stdout, "  {} : {:.6e} {} {:.6e}", c.name, c.lhs, c.relation(), c.rhs);
        }
    }
    if let Some(dir) = out_dir {
        if fs::write(dir.join("admissibility.csv"), admissibility_csv(&report)).is_err() {
            return finish(&mut manifest, "io_error", EXIT_USAGE);
        }
    }
    if report.admissible_w {
        finish(&mut manifest, "admissible", EXIT_OK)
    } else {
        finish(&mut manifest, "inadmissible", EXIT_INADMISSIBLE)
    }
}

/// Samples points of the barrier rectangle times a gradient box and counts
/// those where `|f_i|` exceeds the growth envelope.
pub fn envelope_domination(config: &ExponentConfig, barriers: &BarrierPair, samples: usize, seed: u64) -> subsuper::Result<Verdict> {
    let grid = barriers.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free: Vec<usize> = grid.free_nodes().collect();
    let g_max = 2.0 * barriers.grad_bound * barriers.c;
    let mut violations = 0;
    for _ in 0..samples {
        let j = free[rng.gen_range(0..free.len())];
        let d = grid.distance(grid.nodes()[j]);
        let s: Vec<f64> = (0..2)
            .map(|i| {
                let (l, h) = (barriers.lower[i].values()[j], barriers.upper[i].values()[j]);
                l + rng.gen::<f64>() * (h - l)
            })
            .collect();
        let (g1, g2) = (rng.gen::<f64>() * g_max, rng.gen::<f64>() * g_max);
        let f = eval_f(config, d, s[0], s[1], g1, g2)?;
        let b = growth_envelope(config, barriers, d, g1, g2)?;
        if f.0.abs() > b.0 || f.1.abs() > b.1 {
            violations += 1;
        }
    }
    Ok(Verdict::new(
        "envelope_domination",
        violations as f64,
        0.0,
        format!("{samples} samples with seed {seed}"),
    ))
}

fn plot(i: usize, barriers: &BarrierPair, u: &Field) -> String {
    let x = u.grid().nodes();
    let title = format!("component {}", i + 1);
    svg::line_chart(
        &title,
        "r",
        &[
            svg::Series { label: "lower", color: "#1f77b4", x, y: barriers.lower[i].values() },
            svg::Series { label: "u", color: "#d62728", x, y: u.values() },
            svg::Series { label: "upper", color: "#2ca02c", x, y: barriers.upper[i].values() },
        ],
    )
}

fn error_diagnostic(e: &Error) -> Vec<(String, String)> {
    let mut d = vec![("error".to_string(), e.to_string())];
    match e {
        Error::CalibrationFailure { c_max, diagnostic } => {
            d.push(("c_max".into(), fmt_f64(*c_max)));
            d.push(("c_tried".into(), fmt_f64(diagnostic.c_tried)));
            d.push(("node".into(), diagnostic.node.to_string()));
            d.push(("inequality".into(), diagnostic.inequality.clone()));
            d.push(("margin".into(), fmt_f64(diagnostic.margin)));
            d.push(("violations".into(), diagnostic.violations.to_string()));
        }
        Error::NonConvergence { iterations, residual, .. } => {
            d.push(("iterations".into(), iterations.to_string()));
            d.push(("residual".into(), fmt_f64(*residual)));
        }
        Error::BarrierDegeneracy { node, value } => {
            d.push(("node".into(), node.to_string()));
            d.push(("value".into(), fmt_f64(*value)));
        }
        _ => {}
    }
    d
}

fn exit_for(e: &Error) -> (i32, &'static str) {
    match e {
        Error::CalibrationFailure { .. } | Error::BarrierDegeneracy { .. } => (EXIT_CALIBRATION, "calibration_failure"),
        Error::NonConvergence { .. } => (EXIT_NONCONVERGENCE, "nonconvergence"),
        Error::Parse { .. } | Error::InvalidParameter(_) | Error::NonIntegrableWeight { .. } => {
            (EXIT_USAGE, "invalid_config")
        }
        _ => (EXIT_VERIFICATION, "verification_failure"),
    }
}

/// Calibration, iteration and verification, with all artifacts written to
/// `out_dir`. The manifest is written before anything else.
pub fn cmd_solve(config_path: &Path, overrides: &Overrides, out_dir: &Path, stdout: &mut dyn Write) -> i32 {
    let mut manifest = RunManifest::new("solve", config_path, out_dir);
    if let Err(e) = create_out_dir(out_dir).and_then(|_| manifest.write(out_dir)) {
        let _ = writeln!(stdout, "error: cannot write to {}: {e}", out_dir.display());
        return EXIT_USAGE;
    }
    let fail = |manifest: &mut RunManifest, status: &str, code: i32, diag: Vec<(String, String)>, stdout: &mut dyn Write| {
        for (k, v) in &diag {
            let _ = writeln!(stdout, "{k}: {v}");
        }
        manifest.diagnostic.extend(diag);
        match manifest.finish(out_dir, status, code) {
            Ok(()) => code,
            Err(_) => EXIT_USAGE,
        }
    };

    let (text, mut config) = match read_config(config_path) {
        Ok(v) => v,
        Err(e) => return fail(&mut manifest, "parse_error", EXIT_USAGE, vec![("error".into(), e)], stdout),
    };
    overrides.apply(&mut config);
    manifest.config_hash = content_hash(text.as_bytes());
    manifest.seed = config.solver.seed;
    manifest.grid = vec![
        ("domain".into(), config.grid.domain.name().into()),
        ("cells".into(), config.grid.cells.to_string()),
        ("grading".into(), format!("{:?}", config.grid.grading)),
        ("quadrature".into(), config.grid.quadrature.to_string()),
        ("delta".into(), format!("{:?}", config.grid.delta)),
    ];
    if manifest.write(out_dir).is_err() {
        return EXIT_USAGE;
    }

    match run_pipeline(&config, out_dir, stdout) {
        Ok((status, code)) => match manifest.finish(out_dir, status, code) {
            Ok(()) => code,
            Err(_) => EXIT_USAGE,
        },
        Err(PipelineError::Inadmissible(report)) => {
            let diag = report.violated.iter().map(|c| (c.name.clone(), format!("{:e} {} {:e}", c.lhs, c.relation(), c.rhs))).collect();
            fail(&mut manifest, "inadmissible", EXIT_INADMISSIBLE, diag, stdout)
        }
        Err(PipelineError::Core(e)) => {
            let (code, status) = exit_for(&e);
            fail(&mut manifest, status, code, error_diagnostic(&e), stdout)
        }
        Err(PipelineError::Io(e)) => fail(&mut manifest, "io_error", EXIT_USAGE, vec![("error".into(), e.to_string())], stdout),
    }
}

enum PipelineError {
    Inadmissible(AdmissibilityReport),
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for PipelineError {
    fn from(e: Error) -> Self {
        PipelineError::Core(e)
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e)
    }
}

fn run_pipeline(config: &RunConfig, out: &Path, stdout: &mut dyn Write) -> Result<(&'static str, i32), PipelineError> {
    fs::write(out.join("config.txt"), config.to_text())?;
    let admissibility = check_admissibility(&config.exponents)?;
    fs::write(out.join("admissibility.csv"), admissibility_csv(&admissibility))?;
    if !admissibility.admissible_w {
        return Err(PipelineError::Inadmissible(admissibility));
    }
    let grid = config.build_grid()?;
    let barriers = calibrate_c(&config.exponents, &grid, config.grid.delta, config.solver.c_max, config.solver.n_bisect)?;
    for (name, content) in barriers.export() {
        fs::write(out.join(name), content)?;
    }
    let _ = writeln!(stdout, "C* = {}", fmt_f64(barriers.c));

    let report = iterate(&config.exponents, &barriers, &config.solver.iterate_options())?;
    write_report(out, &barriers, &report)?;
    let _ = write!(stdout, "{}", report.summary());
    if !report.converged {
        return Ok(("nonconvergence", EXIT_NONCONVERGENCE));
    }

    let mut verdicts = verify_report(&config.exponents, &barriers, &report, config.solver.residual_tol)?;
    verdicts.push(envelope_domination(&config.exponents, &barriers, ENVELOPE_SAMPLES, config.solver.seed)?);
    fs::write(out.join("verdicts.csv"), verdicts_to_csv(&verdicts))?;
    for v in &verdicts {
        let _ = writeln!(stdout, "{} {} measured {:.3e} threshold {:.3e}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.measured, v.threshold);
    }
    if verdicts.iter().all(|v| v.pass) {
        Ok(("verified", EXIT_OK))
    } else {
        Ok(("verification_failure", EXIT_VERIFICATION))
    }
}

fn write_report(out: &Path, barriers: &BarrierPair, report: &SolveReport) -> std::io::Result<()> {
    fs::write(out.join("history.csv"), report.to_csv())?;
    fs::write(out.join("report.txt"), report.summary())?;
    for (i, u) in report.fields.iter().enumerate() {
        fs::write(out.join(format!("u{}.csv", i + 1)), u.to_csv())?;
        fs::write(out.join(format!("u{}.svg", i + 1)), plot(i, barriers, u))?;
    }
    Ok(())
}

/// One swept parameter and its values.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<f64>,
}

/// Parses `key=start:stop:count` (inclusive, evenly spaced) or
/// `key=v1,v2,...` terms separated by `;`.
pub fn parse_sweep(spec: &str) -> Result<Vec<SweepAxis>, String> {
    let mut axes = Vec::new();
    for term in spec.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let (key, range) = term.split_once('=').ok_or_else(|| format!("expected 'key=values', found '{term}'"))?;
        let key = key.trim();
        if subsuper::config::section_of(key).is_none() || matches!(key, "kind" | "domain" | "initial") {
            return Err(format!("'{key}' is not a numeric config key"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number '{}' in '{term}'", s.trim()));
        let parts: Vec<&str> = range.split(':').collect();
        let values = match parts.as_slice() {
            [a, b, n] => {
                let (a, b) = (num(a)?, num(b)?);
                let n: usize = n.trim().parse().map_err(|_| format!("bad count in '{term}'"))?;
                match n {
                    0 => return Err(format!("zero steps in '{term}'")),
                    1 => vec![a],
                    _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
                }
            }
            [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
            _ => return Err(format!("cannot read range '{range}'")),
        };
        if values.is_empty() {
            return Err(format!("no values in '{term}'"));
        }
        if axes.iter().any(|a: &SweepAxis| a.key == key) {
            return Err(format!("'{key}' swept twice"));
        }
        axes.push(SweepAxis { key: key.to_string(), values });
    }
    if axes.is_empty() {
        return Err("empty sweep specification".to_string());
    }
    Ok(axes)
}

/// Cartesian product in row-major order (last axis fastest).
pub fn sweep_points(axes: &[SweepAxis]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub admissible_w: Option<bool>,
    pub admissible_c1: Option<bool>,
    pub c_star: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub localization: Option<f64>,
    pub max_lp_grad: Option<[f64; 2]>,
    pub max_sup_grad: Option<[f64; 2]>,
    pub status: String,
    pub runtime: f64,
}

impl SweepRow {
    fn empty(params: Vec<f64>) -> SweepRow {
        SweepRow {
            params,
            admissible_w: None,
            admissible_c1: None,
            c_star: None,
            converged: None,
            iterations: None,
            localization: None,
            max_lp_grad: None,
            max_sup_grad: None,
            status: String::new(),
            runtime: 0.0,
        }
    }
}

fn value_text(v: f64) -> String {
    // sweep values are written with the shortest round-trip form
    format!("{v:?}")
}

/// Runs one sweep point: admissibility, then calibration and iteration for
/// admissible exponents. Failures become the row status.
pub fn run_point(template: &RunConfig, axes: &[SweepAxis], params: Vec<f64>) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow::empty(params);
    let mut config = template.clone();
    for (axis, v) in axes.iter().zip(&row.params) {
        let text = if matches!(axis.key.as_str(), "n" | "cells" | "quadrature" | "max_iter" | "n_bisect" | "seed") {
            format!("{}", v.round() as i64)
        } else {
            value_text(*v)
        };
        if let Err(e) = config.set(&axis.key, &text) {
            row.status = format!("invalid: {e}");
            return row;
        }
    }
    row.status = match sweep_pipeline(&config, &mut row) {
        Ok(s) => s.to_string(),
        Err(e) => match e {
            Error::CalibrationFailure { .. } | Error::BarrierDegeneracy { .. } => "calibration_failure".into(),
            Error::NonConvergence { .. } => "nonconvergence".into(),
            other => format!("error: {other}"),
        },
    };
    row.runtime = start.elapsed().as_secs_f64();
    row
}

fn sweep_pipeline(config: &RunConfig, row: &mut SweepRow) -> subsuper::Result<&'static str> {
    let admissibility = check_admissibility(&config.exponents)?;
    row.admissible_w = Some(admissibility.admissible_w);
    row.admissible_c1 = Some(admissibility.admissible_c1);
    if !admissibility.admissible_w {
        return Ok("inadmissible");
    }
    let grid = config.build_grid()?;
    let barriers = calibrate_c(&config.exponents, &grid, config.grid.delta, config.solver.c_max, config.solver.n_bisect)?;
    row.c_star = Some(barriers.c);
    let report = iterate(&config.exponents, &barriers, &config.solver.iterate_options())?;
    row.converged = Some(report.converged);
    row.iterations = Some(report.iterations);
    row.localization = Some(report.localization_violation);
    row.max_lp_grad = Some(report.apriori_max_lp_grad);
    row.max_sup_grad = Some(report.apriori_max_sup_grad);
    Ok(if report.converged { "ok" } else { "not_converged" })
}

/// Atlas CSV. Runtimes go to a separate table so that the atlas itself is
/// reproducible byte for byte.
pub fn atlas_csv(axes: &[SweepAxis], rows: &[SweepRow]) -> String {
    let mut s = String::from("point");
    for a in axes {
        let _ = write!(s, ",{}", a.key);
    }
    s.push_str(
        ",admissible_w,admissible_c1,c_star,converged,iterations,localization,max_lp_grad1,max_lp_grad2,max_sup_grad1,max_sup_grad2,status\n",
    );
    let opt_f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let opt_b = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
    for (k, r) in rows.iter().enumerate() {
        let _ = write!(s, "{k}");
        for v in &r.params {
            let _ = write!(s, ",{}", fmt_f64(*v));
        }
        let _ = writeln!(
            s,
            ",{},{},{},{},{},{},{},{},{},{},{}",
            opt_b(r.admissible_w),
            opt_b(r.admissible_c1),
            opt_f(r.c_star),
            opt_b(r.converged),
            r.iterations.map(|n| n.to_string()).unwrap_or_default(),
            opt_f(r.localization),
            opt_f(r.max_lp_grad.map(|g| g[0])),
            opt_f(r.max_lp_grad.map(|g| g[1])),
            opt_f(r.max_sup_grad.map(|g| g[0])),
            opt_f(r.max_sup_grad.map(|g| g[1])),
            r.status.replace(',', ";")
        );
    }
    s
}

fn runtime_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("point,runtime_s\n");
    for (k, r) in rows.iter().enumerate() {
        let _ = writeln!(s, "{k},{:.6}", r.runtime);
    }
    s
}

/// Cartesian sweep over `spec` around the template config. Points run
/// concurrently on `parallelism` threads; rows keep the sweep order.
pub fn cmd_sweep(config_path: &Path, spec: &str, overrides: &Overrides, out_dir: &Path, parallelism: usize, stdout: &mut dyn Write) -> i32 {
    let mut manifest = RunManifest::new("sweep", config_path, out_dir);
    if let Err(e) = create_out_dir(out_dir).and_then(|_| manifest.write(out_dir)) {
        let _ = writeln!(stdout, "error: cannot write to {}: {e}", out_dir.display());
        return EXIT_USAGE;
    }
    let usage = |manifest: &mut RunManifest, msg: String, stdout: &mut dyn Write| {
        let _ = writeln!(stdout, "error: {msg}");
        manifest.diagnostic.push(("error".into(), msg));
        let _ = manifest.finish(out_dir, "usage_error", EXIT_USAGE);
        EXIT_USAGE
    };
    manifest.diagnostic.push(("sweep".into(), spec.to_string()));
    let axes = match parse_sweep(spec) {
        Ok(a) => a,
        Err(e) => return usage(&mut manifest, e, stdout),
    };
    let (text, mut template) = match read_config(config_path) {
        Ok(v) => v,
        Err(e) => return usage(&mut manifest, e, stdout),
    };
    overrides.apply(&mut template);
    manifest.config_hash = content_hash(text.as_bytes());
    manifest.seed = template.solver.seed;
    manifest.diagnostic.push(("parallel".into(), parallelism.to_string()));
    if manifest.write(out_dir).is_err() {
        return EXIT_USAGE;
    }

    let points = sweep_points(&axes);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build() {
        Ok(p) => p,
        Err(e) => return usage(&mut manifest, e.to_string(), stdout),
    };
    let rows: Vec<SweepRow> = pool.install(|| points.into_par_iter().map(|p| run_point(&template, &axes, p)).collect());

    let written = fs::write(out_dir.join("atlas.csv"), atlas_csv(&axes, &rows))
        .and_then(|_| fs::write(out_dir.join("atlas_runtime.csv"), runtime_csv(&rows)));
    if let Err(e) = written {
        return usage(&mut manifest, e.to_string(), stdout);
    }
    let ok = rows.iter().filter(|r| r.status == "ok").count();
    let _ = writeln!(stdout, "{} points, {ok} converged", rows.len());
    match manifest.finish(out_dir, "completed", EXIT_OK) {
        Ok(()) => EXIT_OK,
        Err(_) => EXIT_USAGE,
    }
}
