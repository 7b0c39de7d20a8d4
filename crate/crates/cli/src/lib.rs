//! Report builders behind the `spline-compander` command-line tool.
//!
//! Every command produces a serialisable report. [`Output::render`] writes it
//! as a single JSON document or as CSV with a header row. Numbers are rounded
//! to six significant digits on output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fmt;

use anyhow::{bail, Context, Result};
use serde::{Serialize, Serializer};

use spline_compander::design::{design, DesignConfig, DistortionReport};
use spline_compander::gauss::SourceModel;
use spline_compander::optimizer::{sweep, SweepResult, SweepTemplate};
use spline_compander::oracles::{self, LLOYD_MAX_TOLERANCE};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Level counts reproduced by `table1`.
pub const TABLE_LEVELS: [usize; 2] = [16, 32];

/// Monte-Carlo agreement threshold in standard errors.
pub const VALIDATION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

/// Interior threshold choice for `design` / `validate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum X1Choice {
    Auto,
    Value(f64),
}

impl std::str::FromStr for X1Choice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(X1Choice::Auto);
        }
        s.parse::<f64>()
            .map(X1Choice::Value)
            .map_err(|_| format!("expected a number or \"auto\", got {s:?}"))
    }
}

impl fmt::Display for X1Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            X1Choice::Auto => f.write_str("auto"),
            X1Choice::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Failure of the design pipeline itself, as opposed to bad arguments.
#[derive(Debug)]
pub struct DesignFailure(pub spline_compander::Error);

impl fmt::Display for DesignFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "design failed: {}", self.0)
    }
}

impl std::error::Error for DesignFailure {}

fn pipeline<T>(r: spline_compander::Result<T>) -> Result<T> {
    r.map_err(|e| DesignFailure(e).into())
}

/// Rounds to six significant digits.
pub fn sig6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn ser6<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(sig6(*x))
}

fn ser6_opt<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&sig6(*v)),
        None => s.serialize_none(),
    }
}

fn ser6_vec<S: Serializer>(x: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(x.iter().map(|v| sig6(*v)))
}

fn fmt6(x: f64) -> String {
    sig6(x).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distortion {
    #[serde(serialize_with = "ser6")]
    pub granular: f64,
    #[serde(serialize_with = "ser6")]
    pub overload: f64,
    #[serde(serialize_with = "ser6")]
    pub total: f64,
    #[serde(serialize_with = "ser6")]
    pub sqnr_db: f64,
    #[serde(serialize_with = "ser6")]
    pub overload_exact: f64,
    #[serde(serialize_with = "ser6")]
    pub total_exact: f64,
    #[serde(serialize_with = "ser6")]
    pub sqnr_exact_db: f64,
}

impl From<DistortionReport> for Distortion {
    fn from(r: DistortionReport) -> Self {
        Self {
            granular: r.granular,
            overload: r.overload,
            total: r.total,
            sqnr_db: r.sqnr_db,
            overload_exact: r.overload_exact,
            total_exact: r.total_exact,
            sqnr_exact_db: r.sqnr_exact_db,
        }
    }
}

impl Distortion {
    fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("granular", self.granular),
            ("overload", self.overload),
            ("total", self.total),
            ("sqnr_db", self.sqnr_db),
            ("overload_exact", self.overload_exact),
            ("total_exact", self.total_exact),
            ("sqnr_exact_db", self.sqnr_exact_db),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentRow {
    pub segment: usize,
    #[serde(serialize_with = "ser6")]
    pub lo: f64,
    #[serde(serialize_with = "ser6")]
    pub hi: f64,
    #[serde(serialize_with = "ser6")]
    pub r: f64,
    #[serde(serialize_with = "ser6")]
    pub p: f64,
    #[serde(serialize_with = "ser6")]
    pub q: f64,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub n_levels: usize,
    #[serde(serialize_with = "ser6")]
    pub x_max: f64,
    #[serde(serialize_with = "ser6")]
    pub x1: f64,
    /// `"given"` or `"sweep"`.
    pub x1_source: &'static str,
    #[serde(serialize_with = "ser6")]
    pub step: f64,
    #[serde(serialize_with = "ser6")]
    pub y_max: f64,
    pub segments: Vec<SegmentRow>,
    #[serde(serialize_with = "ser6_vec")]
    pub knot_jumps: Vec<f64>,
    pub counts: Vec<usize>,
    #[serde(serialize_with = "ser6_vec")]
    pub thresholds: Vec<f64>,
    #[serde(serialize_with = "ser6_vec")]
    pub levels: Vec<f64>,
    #[serde(serialize_with = "ser6_vec")]
    pub cell_lengths: Vec<f64>,
    pub distortion: Distortion,
}

fn check_levels(levels: usize) -> Result<()> {
    if levels < 8 || !levels.is_multiple_of(2) {
        bail!(UsageError(format!(
            "--levels must be even and at least 8, got {levels}"
        )));
    }
    Ok(())
}

/// Argument validation failure detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn resolve_x1(levels: usize, x1: X1Choice, grid_step: f64) -> Result<(f64, &'static str)> {
    let source = SourceModel::unit();
    let x_max = pipeline(source.support_threshold(levels))?;
    match x1 {
        X1Choice::Value(v) => {
            if !(v > 0.0 && v < x_max) {
                bail!(UsageError(format!(
                    "--x1 must lie in (0, {x_max}), got {v}"
                )));
            }
            Ok((v, "given"))
        }
        X1Choice::Auto => {
            check_grid_step(grid_step, x_max)?;
            let s = pipeline(sweep(&SweepTemplate::new(source, levels), grid_step))?;
            Ok((s.best_x1, "sweep"))
        }
    }
}

fn check_grid_step(grid_step: f64, x_max: f64) -> Result<()> {
    if !(grid_step > 0.0 && grid_step < x_max / 2.0) {
        bail!(UsageError(format!(
            "--grid-step must lie in (0, {}), got {grid_step}",
            x_max / 2.0
        )));
    }
    Ok(())
}

pub fn design_report(levels: usize, x1: X1Choice, grid_step: f64) -> Result<DesignReport> {
    check_levels(levels)?;
    let (x1, x1_source) = resolve_x1(levels, x1, grid_step)?;
    let config = pipeline(DesignConfig::two_segment(SourceModel::unit(), levels, x1))?;
    let q = pipeline(design(&config))?;
    let report = pipeline(q.sqnr())?;
    let segments = q
        .spline()
        .segments()
        .iter()
        .zip(q.counts())
        .enumerate()
        .map(|(i, (s, &n))| SegmentRow {
            segment: i + 1,
            lo: s.lo,
            hi: s.hi,
            r: s.r,
            p: s.p,
            q: s.q,
            levels: n,
        })
        .collect();
    Ok(DesignReport {
        n_levels: levels,
        x_max: q.x_max(),
        x1,
        x1_source,
        step: q.step(),
        y_max: q.y_max(),
        segments,
        knot_jumps: q.spline().knot_jumps(),
        counts: q.counts().to_vec(),
        thresholds: q.thresholds().to_vec(),
        levels: q.levels().to_vec(),
        cell_lengths: q.cell_lengths().to_vec(),
        distortion: report.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(serialize_with = "ser6")]
    pub x1: f64,
    pub valid: bool,
    #[serde(serialize_with = "ser6_opt")]
    pub sqnr_db: Option<f64>,
    #[serde(serialize_with = "ser6_opt")]
    pub granular: Option<f64>,
    #[serde(serialize_with = "ser6_opt")]
    pub total: Option<f64>,
    pub is_best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub n_levels: usize,
    #[serde(serialize_with = "ser6")]
    pub x_max: f64,
    #[serde(serialize_with = "ser6")]
    pub grid_step: f64,
    #[serde(serialize_with = "ser6")]
    pub best_x1: f64,
    #[serde(serialize_with = "ser6")]
    pub best_sqnr_db: f64,
    pub rows: Vec<SweepRow>,
}

impl From<&SweepResult> for SweepReport {
    fn from(s: &SweepResult) -> Self {
        let rows = s
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| SweepRow {
                x1: c.x1,
                valid: c.report.is_some(),
                sqnr_db: c.report.map(|r| r.sqnr_db),
                granular: c.report.map(|r| r.granular),
                total: c.report.map(|r| r.total),
                is_best: i == s.best_index,
            })
            .collect();
        Self {
            n_levels: s.n_levels,
            x_max: s.x_max,
            grid_step: s.grid_step,
            best_x1: s.best_x1,
            best_sqnr_db: s.best_sqnr_db,
            rows,
        }
    }
}

pub fn sweep_result(levels: usize, grid_step: f64) -> Result<SweepResult> {
    check_levels(levels)?;
    let source = SourceModel::unit();
    check_grid_step(grid_step, pipeline(source.support_threshold(levels))?)?;
    pipeline(sweep(&SweepTemplate::new(source, levels), grid_step))
}

pub fn sweep_report(levels: usize, grid_step: f64) -> Result<SweepReport> {
    Ok((&sweep_result(levels, grid_step)?).into())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub n_levels: usize,
    #[serde(serialize_with = "ser6")]
    pub bits: f64,
    #[serde(serialize_with = "ser6")]
    pub x_max: f64,
    #[serde(serialize_with = "ser6")]
    pub x1_equ: f64,
    #[serde(serialize_with = "ser6")]
    pub sqnr_equ_db: f64,
    #[serde(serialize_with = "ser6")]
    pub x1_num: f64,
    #[serde(serialize_with = "ser6")]
    pub sqnr_num_db: f64,
    #[serde(serialize_with = "ser6")]
    pub sqnr_opt_db: f64,
    #[serde(serialize_with = "ser6")]
    pub sqnr_exact_compressor_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigurePoint {
    #[serde(serialize_with = "ser6")]
    pub bits: f64,
    pub variant: &'static str,
    #[serde(serialize_with = "ser6")]
    pub sqnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Report {
    #[serde(serialize_with = "ser6")]
    pub grid_step: f64,
    pub rows: Vec<TableRow>,
    /// SQNR against bits per sample for the three variants.
    pub figure2: Vec<FigurePoint>,
}

pub fn table1_report(grid_step: f64) -> Result<Table1Report> {
    let source = SourceModel::unit();
    let mut rows = Vec::new();
    for n in TABLE_LEVELS {
        let s = sweep_result(n, grid_step)?;
        let equ = s.midpoint();
        let lm = pipeline(oracles::lloyd_max(&source, n, LLOYD_MAX_TOLERANCE))?;
        let exact = pipeline(oracles::exact_compressor_sqnr(&source, n))?;
        rows.push(TableRow {
            n_levels: n,
            bits: (n as f64).log2(),
            x_max: s.x_max,
            x1_equ: equ.x1,
            sqnr_equ_db: equ.sqnr_db().context("midpoint design is invalid")?,
            x1_num: s.best_x1,
            sqnr_num_db: s.best_sqnr_db,
            sqnr_opt_db: lm.sqnr_db,
            sqnr_exact_compressor_db: exact.sqnr_db,
        });
    }
    let figure2 = rows
        .iter()
        .flat_map(|r| {
            [
                ("equ", r.sqnr_equ_db),
                ("num", r.sqnr_num_db),
                ("opt", r.sqnr_opt_db),
            ]
            .into_iter()
            .map(move |(variant, sqnr_db)| FigurePoint {
                bits: r.bits,
                variant,
                sqnr_db,
            })
        })
        .collect();
    Ok(Table1Report {
        grid_step,
        rows,
        figure2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n_levels: usize,
    #[serde(serialize_with = "ser6")]
    pub x1: f64,
    pub x1_source: &'static str,
    pub samples: u64,
    pub seed: u64,
    #[serde(serialize_with = "ser6")]
    pub analytic_total: f64,
    #[serde(serialize_with = "ser6")]
    pub analytic_total_exact_overload: f64,
    #[serde(serialize_with = "ser6")]
    pub mc_mean: f64,
    #[serde(serialize_with = "ser6")]
    pub mc_std_error: f64,
    #[serde(serialize_with = "ser6")]
    pub z_score: f64,
    #[serde(serialize_with = "ser6")]
    pub z_score_exact_overload: f64,
    #[serde(serialize_with = "ser6")]
    pub threshold_sigmas: f64,
    pub verdict: &'static str,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.verdict == "PASS"
    }
}

/// Compares the analytic total distortion (granular sum plus closed-form
/// overload) with a seeded Monte-Carlo estimate.
pub fn validate_report(
    levels: usize,
    x1: X1Choice,
    grid_step: f64,
    samples: u64,
    seed: u64,
) -> Result<ValidationReport> {
    check_levels(levels)?;
    if samples == 0 {
        bail!(UsageError("--samples must be at least 1".into()));
    }
    let (x1, x1_source) = resolve_x1(levels, x1, grid_step)?;
    let source = SourceModel::unit();
    let config = pipeline(DesignConfig::two_segment(source, levels, x1))?;
    let q = pipeline(design(&config))?;
    let report = pipeline(q.sqnr())?;
    let mc = pipeline(oracles::mc_distortion(&q, &source, samples, seed))?;
    let z = mc.z_score(report.total);
    Ok(ValidationReport {
        n_levels: levels,
        x1,
        x1_source,
        samples,
        seed,
        analytic_total: report.total,
        analytic_total_exact_overload: report.total_exact,
        mc_mean: mc.mean_distortion,
        mc_std_error: mc.std_error,
        z_score: z,
        z_score_exact_overload: mc.z_score(report.total_exact),
        threshold_sigmas: VALIDATION_SIGMAS,
        verdict: if z <= VALIDATION_SIGMAS {
            "PASS"
        } else {
            "FAIL"
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LloydMaxReport {
    pub n_levels: usize,
    #[serde(serialize_with = "ser6_vec")]
    pub levels: Vec<f64>,
    #[serde(serialize_with = "ser6_vec")]
    pub thresholds: Vec<f64>,
    #[serde(serialize_with = "ser6")]
    pub distortion: f64,
    #[serde(serialize_with = "ser6")]
    pub sqnr_db: f64,
    pub iterations: usize,
}

pub fn lloyd_max_report(levels: usize) -> Result<LloydMaxReport> {
    if levels < 2 {
        bail!(UsageError(format!(
            "--levels must be at least 2, got {levels}"
        )));
    }
    let lm = pipeline(oracles::lloyd_max(
        &SourceModel::unit(),
        levels,
        LLOYD_MAX_TOLERANCE,
    ))?;
    Ok(LloydMaxReport {
        n_levels: levels,
        levels: lm.levels,
        thresholds: lm.thresholds,
        distortion: lm.distortion,
        sqnr_db: lm.sqnr_db,
        iterations: lm.iterations,
    })
}

/// Any command result.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Design(DesignReport),
    Sweep(SweepReport),
    Table1(Table1Report),
    Validate(ValidationReport),
    LloydMax(LloydMaxReport),
}

fn csv_bytes<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>>(f: F) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w)?;
    w.into_inner().context("flushing CSV output")
}

/// `quantity,index,value` rows for reports without a natural table shape.
fn kv_csv(rows: &[(String, Option<usize>, String)]) -> Result<Vec<u8>> {
    csv_bytes(|w| {
        w.write_record(["quantity", "index", "value"])?;
        for (name, index, value) in rows {
            let index = index.map(|i| i.to_string()).unwrap_or_default();
            w.write_record([name.as_str(), index.as_str(), value.as_str()])?;
        }
        Ok(())
    })
}

fn push_vec(rows: &mut Vec<(String, Option<usize>, String)>, name: &str, values: &[f64]) {
    rows.extend(
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (name.to_string(), Some(i + 1), fmt6(*v))),
    );
}

impl Output {
    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut bytes = match self {
                    Output::Design(r) => serde_json::to_vec_pretty(r),
                    Output::Sweep(r) => serde_json::to_vec_pretty(r),
                    Output::Table1(r) => serde_json::to_vec_pretty(r),
                    Output::Validate(r) => serde_json::to_vec_pretty(r),
                    Output::LloydMax(r) => serde_json::to_vec_pretty(r),
                }?;
                bytes.push(b'\n');
                Ok(bytes)
            }
            Format::Csv => self.render_csv(),
        }
    }

    fn render_csv(&self) -> Result<Vec<u8>> {
        match self {
            Output::Sweep(r) => csv_bytes(|w| {
                for row in &r.rows {
                    w.serialize(row)?;
                }
                Ok(())
            }),
            Output::Table1(r) => csv_bytes(|w| {
                for row in &r.rows {
                    w.serialize(row)?;
                }
                Ok(())
            }),
            Output::Validate(r) => csv_bytes(|w| w.serialize(r)),
            Output::Design(r) => {
                let mut rows: Vec<(String, Option<usize>, String)> = vec![
                    ("n_levels".into(), None, r.n_levels.to_string()),
                    ("x_max".into(), None, fmt6(r.x_max)),
                    ("x1".into(), None, fmt6(r.x1)),
                    ("x1_source".into(), None, r.x1_source.to_string()),
                    ("step".into(), None, fmt6(r.step)),
                    ("y_max".into(), None, fmt6(r.y_max)),
                ];
                for s in &r.segments {
                    for (name, v) in [
                        ("lo", s.lo),
                        ("hi", s.hi),
                        ("r", s.r),
                        ("p", s.p),
                        ("q", s.q),
                    ] {
                        rows.push((format!("segment_{name}"), Some(s.segment), fmt6(v)));
                    }
                }
                push_vec(&mut rows, "knot_jump", &r.knot_jumps);
                rows.extend(
                    r.counts
                        .iter()
                        .enumerate()
                        .map(|(i, c)| ("count".to_string(), Some(i + 1), c.to_string())),
                );
                push_vec(&mut rows, "threshold", &r.thresholds);
                push_vec(&mut rows, "level", &r.levels);
                push_vec(&mut rows, "cell_length", &r.cell_lengths);
                rows.extend(
                    r.distortion
                        .rows()
                        .into_iter()
                        .map(|(n, v)| (n.to_string(), None, fmt6(v))),
                );
                kv_csv(&rows)
            }
            Output::LloydMax(r) => {
                let mut rows = vec![
                    ("n_levels".to_string(), None, r.n_levels.to_string()),
                    ("distortion".to_string(), None, fmt6(r.distortion)),
                    ("sqnr_db".to_string(), None, fmt6(r.sqnr_db)),
                    ("iterations".to_string(), None, r.iterations.to_string()),
                ];
                push_vec(&mut rows, "level", &r.levels);
                push_vec(&mut rows, "threshold", &r.thresholds);
                kv_csv(&rows)
            }
        }
    }
}

/// Record of one invocation, written next to its output.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, parameters: BTreeMap<String, String>, outputs: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            parameters,
            tool_version: TOOL_VERSION.to_string(),
            outputs,
        }
    }

    /// Manifest path for an output file.
    pub fn path_for(output: &std::path::Path) -> std::path::PathBuf {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        name.into()
    }

    /// Reconstructs the command-line arguments of the recorded run.
    pub fn to_args(&self) -> Vec<String> {
        let mut args = vec![self.command.clone()];
        for (k, v) in &self.parameters {
            args.push(format!("--{k}"));
            args.push(v.clone());
        }
        args
    }
}
