//! Scenario runs: per-path decomposition, pass/fail checks against the
//! scenario's tolerances, and CSV/JSON/text artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::{cascade_decompose, decompose, lyapunov_sum, CascadeResult, DecompositionResult, LyapunovEstimate};
use crate::driver::sample_driver;
use crate::error::{FlowError, Result};
use crate::linalg::{matrix_to_rows, max_abs, qr_positive, Matrix, Vector};
use crate::scenario::{OracleCheck, Prepared, Scenario, Target};
use crate::truth::{self, Truth};

/// First line of every CSV artifact; bump the version when columns change.
pub const CSV_VERSION: &str = "flowfactor-csv v1";

/// 17 significant digits, `.` decimal separator.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// `None` for checks on aggregates over paths.
    pub path: Option<usize>,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, path: Option<usize>, value: f64, tolerance: f64) -> Self {
        // NaN never passes
        Self { name: name.into(), path, value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub index: usize,
    pub stream: Option<u64>,
    /// Vertical factor at the terminal time (top level for cascades).
    pub terminal_q: Vec<Vec<f64>>,
    pub max_fixed_point_error: Option<f64>,
    pub max_kernel_residual: f64,
    /// One entry per level.
    pub max_group_residual: Vec<f64>,
    pub max_reconstruction_error: Option<f64>,
    pub flagged_times: usize,
    pub lyapunov: Option<LyapunovEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub scenario: String,
    pub target: String,
    pub seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: String,
    pub reproject: bool,
    pub paths: usize,
    pub generator: &'static str,
    pub version: &'static str,
    pub csv_format: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub paths: Vec<PathSummary>,
    pub aggregate: BTreeMap<String, f64>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// A finished run held in memory; nothing is written until [`write_artifacts`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    /// `(file name, contents)` per path.
    pub csv: Vec<(String, String)>,
    pub scenario_toml: String,
}

struct PathOutcome {
    summary: PathSummary,
    checks: Vec<CheckResult>,
    csv: String,
}

fn header(scenario: &Scenario, index: usize, target: &str) -> String {
    format!("# {CSV_VERSION}; scenario={}; path={index}; target={target}\n", scenario.name)
}

fn push_matrix_names(cols: &mut Vec<String>, prefix: &str, n: usize) {
    for r in 0..n {
        for c in 0..n {
            cols.push(format!("{prefix}_{r}{c}"));
        }
    }
}

fn push_vector_names(cols: &mut Vec<String>, prefix: &str, n: usize) {
    for i in 0..n {
        cols.push(format!("{prefix}_{i}"));
    }
}

fn push_matrix(row: &mut Vec<String>, m: &Matrix) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            row.push(fmt_value(m[(r, c)]));
        }
    }
}

fn push_vector(row: &mut Vec<String>, v: &Vector) {
    row.extend(v.iter().map(|x| fmt_value(*x)));
}

fn target_name(target: &Target) -> String {
    match target {
        Target::Single(s) => s.name(),
        Target::Cascade(c) => c.levels().iter().map(|s| s.name()).collect::<Vec<_>>().join(">"),
    }
}

fn single_csv(scenario: &Scenario, index: usize, res: &DecompositionResult) -> String {
    let n = scenario.dimension;
    let mut out = header(scenario, index, &res.structure.name());
    let mut cols = vec!["t".to_string()];
    push_vector_names(&mut cols, "x", n);
    push_matrix_names(&mut cols, "phi", n);
    cols.push("log_det_flow".into());
    push_matrix_names(&mut cols, "g", n);
    push_vector_names(&mut cols, "h", n);
    push_matrix_names(&mut cols, "q", n);
    cols.extend(["fixed_point_error", "kernel_residual", "group_residual"].map(String::from));
    out.push_str(&cols.join(","));
    out.push('\n');
    for s in &res.samples {
        let mut row = vec![fmt_value(s.t)];
        push_vector(&mut row, &s.x);
        push_matrix(&mut row, &s.phi);
        row.push(fmt_value(s.log_det_flow));
        push_matrix(&mut row, &s.xi.linear);
        push_vector(&mut row, &s.xi.translation);
        push_matrix(&mut row, &s.q);
        row.push(fmt_value(s.fixed_point_error));
        row.push(fmt_value(s.kernel_residual));
        row.push(fmt_value(res.structure.group_residual(&res.frame.to_frame(&s.xi.linear))));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn cascade_csv(scenario: &Scenario, index: usize, res: &CascadeResult, target: &str) -> String {
    let n = scenario.dimension;
    let levels = res.chain.len();
    let mut out = header(scenario, index, target);
    let mut cols = vec!["t".to_string()];
    for l in 1..=levels {
        push_matrix_names(&mut cols, &format!("l{l}_g"), n);
        push_vector_names(&mut cols, &format!("l{l}_h"), n);
        push_matrix_names(&mut cols, &format!("l{l}_q"), n);
        cols.push(format!("l{l}_kernel_residual"));
        cols.push(format!("l{l}_group_residual"));
    }
    cols.extend(["telescoping_residual", "reconstruction_error"].map(String::from));
    out.push_str(&cols.join(","));
    out.push('\n');
    for s in &res.samples {
        let mut row = vec![fmt_value(s.t)];
        for l in 0..levels {
            push_matrix(&mut row, &s.components[l].linear);
            push_vector(&mut row, &s.components[l].translation);
            push_matrix(&mut row, &s.q[l]);
            row.push(fmt_value(s.kernel_residual[l]));
            row.push(fmt_value(s.group_residual[l]));
        }
        row.push(fmt_value(s.telescoping_residual));
        row.push(s.reconstruction_error.map(fmt_value).unwrap_or_else(|| "nan".into()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn drift_check(scenario: &Scenario, name: String, path: usize, residual: f64) -> CheckResult {
    let tol = &scenario.tolerances;
    if scenario.reproject {
        CheckResult::new(name, Some(path), residual, tol.group_reprojected)
    } else {
        CheckResult::new(name, Some(path), residual / scenario.t_end, tol.group_drift_rate)
    }
}

fn run_single_path(scenario: &Scenario, prepared: &Prepared, index: usize) -> Result<PathOutcome> {
    let Target::Single(spec) = &prepared.target else { unreachable!() };
    let tol = &scenario.tolerances;
    let driver = sample_driver(&scenario.driver_mode(index), scenario.noise_channels(), scenario.t_end, scenario.dt)?;
    let res = decompose(spec, &prepared.fields, &driver, &prepared.x0, &prepared.frame, &prepared.probes, &prepared.config)?;
    let p = Some(index);
    let mut checks = vec![
        CheckResult::new("fixed_point", p, res.max_fixed_point_error(), tol.fixed_point),
        CheckResult::new("kernel_membership", p, res.max_kernel_residual(), tol.kernel),
        drift_check(scenario, "group_drift".into(), index, res.max_group_residual),
        CheckResult::new("q_consistency", p, res.max_q_consistency(), tol.q_consistency),
    ];
    if let Some(r) = res.max_reconstruction_error() {
        checks.push(CheckResult::new("reconstruction", p, r, tol.reconstruction));
    }
    let n = scenario.dimension;
    let mut lyapunov = None;
    for check in &scenario.checks {
        match check {
            OracleCheck::Truth => {
                let entry = truth::lookup(scenario.truth.as_deref().unwrap_or_default())
                    .ok_or_else(|| FlowError::Invalid("truth: not registered".into()))?;
                if let Truth::Decomposition(f) = entry.truth {
                    let worst = res
                        .samples
                        .iter()
                        .map(|s| {
                            let exact = f(s.t);
                            max_abs(&(&s.xi.linear - &exact.xi.linear))
                                .max((&s.xi.translation - &exact.xi.translation).amax())
                                .max(max_abs(&(&s.q - &exact.q)))
                        })
                        .fold(0.0, f64::max);
                    checks.push(CheckResult::new("truth", p, worst, tol.truth));
                }
            }
            OracleCheck::Qr => {
                let mut worst = 0.0f64;
                for s in &res.samples {
                    worst = match qr_positive(&s.phi) {
                        Ok((q, _)) => worst.max(max_abs(&(&s.xi.linear - q))),
                        Err(_) => f64::INFINITY,
                    };
                }
                checks.push(CheckResult::new("qr_oracle", p, worst, tol.qr));
            }
            OracleCheck::Killing => {
                let id = Matrix::identity(n, n);
                let q_dev = res.samples.iter().map(|s| max_abs(&(&s.q - &id))).fold(0.0, f64::max);
                let xi_dev = res
                    .samples
                    .iter()
                    .flat_map(|s| res.probes.iter().zip(&s.probe_images).map(move |(pr, img)| (s.xi.apply(pr) - img).amax()))
                    .fold(0.0, f64::max);
                checks.push(CheckResult::new("killing_q", p, q_dev, tol.killing_q));
                checks.push(CheckResult::new("killing_xi", p, xi_dev, tol.killing_xi));
            }
            OracleCheck::Lyapunov => match lyapunov_sum(&res, 0.5 * scenario.t_end) {
                Ok(l) => {
                    checks.push(CheckResult::new("lyapunov_vs_oracle", p, (l.estimate - l.oracle).abs(), tol.lyapunov));
                    lyapunov = Some(l);
                }
                Err(FlowError::NonScalarFactor { residual }) => {
                    checks.push(CheckResult::new("lyapunov_scalar_factor", p, residual, 0.0));
                }
                Err(e) => return Err(e),
            },
        }
    }
    let summary = PathSummary {
        index,
        stream: res.metadata.stream,
        terminal_q: matrix_to_rows(&res.terminal().q),
        max_fixed_point_error: Some(res.max_fixed_point_error()),
        max_kernel_residual: res.max_kernel_residual(),
        max_group_residual: vec![res.max_group_residual],
        max_reconstruction_error: res.max_reconstruction_error(),
        flagged_times: res.flagged_times(tol.kernel).len(),
        lyapunov,
    };
    Ok(PathOutcome { csv: single_csv(scenario, index, &res), summary, checks })
}

fn run_cascade_path(scenario: &Scenario, prepared: &Prepared, index: usize, target: &str) -> Result<PathOutcome> {
    let Target::Cascade(chain) = &prepared.target else { unreachable!() };
    let tol = &scenario.tolerances;
    let driver = sample_driver(&scenario.driver_mode(index), scenario.noise_channels(), scenario.t_end, scenario.dt)?;
    let res = cascade_decompose(chain, &prepared.fields, &driver, &prepared.x0, &prepared.frame, &prepared.probes, &prepared.config)?;
    let p = Some(index);
    let levels = chain.len();
    let mut checks = Vec::new();
    for l in 0..levels {
        checks.push(CheckResult::new(format!("level{}_kernel_membership", l + 1), p, res.max_kernel_residual(l), tol.kernel));
        checks.push(drift_check(scenario, format!("level{}_group_drift", l + 1), index, res.max_group_residual[l]));
    }
    checks.push(CheckResult::new("telescoping", p, res.max_telescoping_residual(), tol.telescoping));
    if let Some(r) = res.max_reconstruction_error() {
        checks.push(CheckResult::new("reconstruction", p, r, tol.reconstruction));
    }
    let last = res.samples.last().expect("initial sample");
    let summary = PathSummary {
        index,
        stream: res.metadata.stream,
        terminal_q: matrix_to_rows(&last.q[levels - 1]),
        max_fixed_point_error: None,
        max_kernel_residual: (0..levels).map(|l| res.max_kernel_residual(l)).fold(0.0, f64::max),
        max_group_residual: res.max_group_residual.clone(),
        max_reconstruction_error: res.max_reconstruction_error(),
        flagged_times: res
            .samples
            .iter()
            .filter(|s| s.kernel_residual.iter().any(|r| !(*r <= tol.kernel)))
            .count(),
        lyapunov: None,
    };
    Ok(PathOutcome { csv: cascade_csv(scenario, index, &res, target), summary, checks })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64 } else { 0.0 };
    (m, var.sqrt())
}

/// Runs every path (in parallel, results in path order) and evaluates all checks.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput> {
    let prepared = scenario.prepare()?;
    let target = target_name(&prepared.target);
    let outcomes: Vec<PathOutcome> = (0..scenario.paths)
        .into_par_iter()
        .map(|i| match &prepared.target {
            Target::Single(_) => run_single_path(scenario, &prepared, i),
            Target::Cascade(_) => run_cascade_path(scenario, &prepared, i, &target),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut checks: Vec<CheckResult> = outcomes.iter().flat_map(|o| o.checks.clone()).collect();
    let mut aggregate = BTreeMap::new();
    let max_of = |f: &dyn Fn(&PathSummary) -> f64| outcomes.iter().map(|o| f(&o.summary)).fold(0.0, f64::max);
    aggregate.insert("max_kernel_residual".into(), max_of(&|s| s.max_kernel_residual));
    aggregate.insert("max_group_residual".into(), max_of(&|s| s.max_group_residual.iter().copied().fold(0.0, f64::max)));
    if outcomes.iter().all(|o| o.summary.max_fixed_point_error.is_some()) {
        aggregate.insert("max_fixed_point_error".into(), max_of(&|s| s.max_fixed_point_error.unwrap_or(0.0)));
    }
    let estimates: Vec<LyapunovEstimate> = outcomes.iter().filter_map(|o| o.summary.lyapunov).collect();
    if !estimates.is_empty() {
        let (m, sd) = mean_std(&estimates.iter().map(|l| l.estimate).collect::<Vec<_>>());
        let (mo, _) = mean_std(&estimates.iter().map(|l| l.oracle).collect::<Vec<_>>());
        aggregate.insert("lyapunov_mean".into(), m);
        aggregate.insert("lyapunov_std".into(), sd);
        aggregate.insert("lyapunov_oracle_mean".into(), mo);
        if scenario.checks.contains(&OracleCheck::Truth) {
            if let Some(Truth::LyapunovSum(v)) = scenario.truth.as_deref().and_then(truth::lookup).map(|e| e.truth) {
                checks.push(CheckResult::new("lyapunov_truth", None, (m - v).abs(), scenario.tolerances.lyapunov));
            }
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    let report = RunReport {
        provenance: Provenance {
            scenario: scenario.name.clone(),
            target,
            seed: scenario.seed,
            dt: scenario.dt,
            t_end: scenario.t_end,
            scheme: scenario.scheme.to_string(),
            reproject: scenario.reproject,
            paths: scenario.paths,
            generator: crate::driver::GENERATOR,
            version: env!("CARGO_PKG_VERSION"),
            csv_format: CSV_VERSION,
        },
        paths: outcomes.iter().map(|o| o.summary.clone()).collect(),
        aggregate,
        checks,
        passed,
    };
    let csv = outcomes.into_iter().map(|o| (format!("path_{:03}.csv", o.summary.index), o.csv)).collect();
    Ok(RunOutput { report, csv, scenario_toml: scenario.to_toml()? })
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| FlowError::Invalid(format!("report serialization: {e}")))
    }

    pub fn to_text(&self) -> String {
        let p = &self.provenance;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {} [{}] scheme={} dt={} t_end={} paths={} seed={} reproject={}",
            p.scenario, p.target, p.scheme, p.dt, p.t_end, p.paths, p.seed, p.reproject
        );
        for c in &self.checks {
            let path = c.path.map(|i| format!("path {i:3}")).unwrap_or_else(|| "all     ".into());
            let _ = writeln!(
                out,
                "{} {path} {:<26} {:>12.4e} <= {:.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            );
        }
        for (k, v) in &self.aggregate {
            let _ = writeln!(out, "  {k} = {v:.10e}");
        }
        let _ = writeln!(out, "{}", if self.passed { "PASSED" } else { "FAILED" });
        out
    }
}

/// Writes `report.json`, `report.txt`, `scenario.toml` and the CSV files into
/// `<root>/<scenario name>/`, replacing a previous run. Files are staged in a
/// sibling directory first so a failure leaves no partial output behind.
pub fn write_artifacts(output: &RunOutput, root: &Path) -> Result<PathBuf> {
    let io = |e: std::io::Error| FlowError::Invalid(format!("writing artifacts under {}: {e}", root.display()));
    let name = &output.report.provenance.scenario;
    fs::create_dir_all(root).map_err(io)?;
    let staging = root.join(format!(".{name}.partial-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io)?;
    }
    let write_all = || -> std::io::Result<()> {
        fs::create_dir(&staging)?;
        let json = output.report.to_json().map_err(std::io::Error::other)?;
        fs::write(staging.join("report.json"), json)?;
        fs::write(staging.join("report.txt"), output.report.to_text())?;
        fs::write(staging.join("scenario.toml"), &output.scenario_toml)?;
        for (file, contents) in &output.csv {
            fs::write(staging.join(file), contents)?;
        }
        Ok(())
    };
    if let Err(e) = write_all() {
        let _ = fs::remove_dir_all(&staging);
        return Err(io(e));
    }
    let target = root.join(name);
    if target.exists() {
        fs::remove_dir_all(&target).map_err(io)?;
    }
    fs::rename(&staging, &target).map_err(io)?;
    Ok(target)
}

/// Closed-form reference on the builtin scenario grid:
/// `t, g (row-major), h, q (row-major)` or `t, lyapunov_sum, log_det_flow`.
pub fn export_truth_csv(name: &str, t_end: f64, dt: f64, sample_every: usize) -> Result<String> {
    let entry = truth::lookup(name).ok_or_else(|| FlowError::Invalid(format!("no ground truth registered for '{name}'")))?;
    let times = truth::grid_times(t_end, dt, sample_every)?;
    let mut out = format!("# {CSV_VERSION}; truth={name}\n");
    match entry.truth {
        Truth::Decomposition(f) => {
            let n = f(0.0).q.nrows();
            let mut cols = vec!["t".to_string()];
            push_matrix_names(&mut cols, "g", n);
            push_vector_names(&mut cols, "h", n);
            push_matrix_names(&mut cols, "q", n);
            out.push_str(&cols.join(","));
            out.push('\n');
            for t in times {
                let p = f(t);
                let mut row = vec![fmt_value(t)];
                push_matrix(&mut row, &p.xi.linear);
                push_vector(&mut row, &p.xi.translation);
                push_matrix(&mut row, &p.q);
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        Truth::LyapunovSum(sum) => {
            out.push_str("t,lyapunov_sum,log_det_flow\n");
            for t in times {
                let _ = writeln!(out, "{},{},{}", fmt_value(t), fmt_value(sum), fmt_value(sum * t));
            }
        }
    }
    Ok(out)
}
