//! Pipeline execution and on-disk output: report.json, per-stage CSV
//! directories and plots/.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, ResolvedStage};
use crate::stages::{run_stage, Check, RunContext, StageOutput, Table};
use crate::{plots, RunError};

#[derive(Debug, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub stage: &'static str,
    pub grid: ultranet::net::Grid,
    pub ladder: Vec<f64>,
    pub passed: bool,
    pub warnings: Vec<String>,
    pub checks: Vec<Check>,
    pub result: Value,
}

/// Outcome of a run; `error` is set when a stage aborted.
#[derive(Debug)]
pub struct RunOutcome {
    pub passed: bool,
    pub error: Option<RunError>,
}

fn io(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Io(format!("{}: {e}", path.display()))
}

fn write_table(dir: &Path, t: &Table) -> Result<(), RunError> {
    let path = dir.join(&t.file);
    let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
    w.write_record(&t.header).map_err(|e| io(&path, e))?;
    for r in &t.rows {
        w.write_record(r).map_err(|e| io(&path, e))?;
    }
    w.flush().map_err(|e| io(&path, e))
}

fn write_outputs(out_dir: &Path, name: &str, out: &StageOutput) -> Result<(), RunError> {
    if !out.tables.is_empty() || !out.files.is_empty() {
        let dir = out_dir.join(name);
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        for t in &out.tables {
            write_table(&dir, t)?;
        }
        for (file, text) in &out.files {
            let path = dir.join(file);
            fs::write(&path, text).map_err(|e| io(&path, e))?;
        }
    }
    if !out.plots.is_empty() {
        let dir = out_dir.join("plots");
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        for p in &out.plots {
            plots::write(p, &dir)?;
        }
    }
    Ok(())
}

pub fn report_path(out_dir: &Path) -> PathBuf {
    out_dir.join("report.json")
}

/// Present only after a run with a failed check or an error.
pub fn marker_path(out_dir: &Path) -> PathBuf {
    out_dir.join("FAILED")
}

pub fn write_marker(out_dir: &Path, reason: &str) -> Result<(), RunError> {
    let path = marker_path(out_dir);
    fs::write(&path, format!("{reason}\n")).map_err(|e| io(&path, e))
}

struct Timings<'a> {
    setup: f64,
    total: f64,
    stages: &'a Map<String, Value>,
}

fn flush_report(out_dir: &Path, cfg: &ExperimentConfig, records: &[StageRecord], timings: Timings, error: Option<&RunError>) -> Result<(), RunError> {
    let passed = error.is_none() && records.iter().all(|r| r.passed);
    let report = json!({
        "tool": "ultranet",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "passed": passed,
        "error": error.map(|e| e.to_string()),
        "stages": records,
        "timings": {"setup": timings.setup, "total": timings.total, "stages": timings.stages},
    });
    let path = report_path(out_dir);
    let text = serde_json::to_string_pretty(&report).map_err(|e| io(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io(&path, e))
}

/// Runs every stage in order; a stage error stops the run after the
/// partial report is written.
pub fn run_pipeline(cfg: &ExperimentConfig, stages: &[ResolvedStage], out_dir: &Path) -> Result<RunOutcome, RunError> {
    fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let marker = marker_path(out_dir);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| io(&marker, e))?;
    }
    let start = Instant::now();
    let mut records = Vec::new();
    let mut timings = Map::new();
    let mut error = None;
    let t0 = Instant::now();
    let ctx = RunContext::new(cfg);
    let setup = t0.elapsed().as_secs_f64();
    match ctx {
        Err(e) => error = Some(e),
        Ok(ctx) => {
            for st in stages {
                let t0 = Instant::now();
                let out = run_stage(&ctx, st).and_then(|out| write_outputs(out_dir, &st.name, &out).map(|_| out));
                timings.insert(st.name.clone(), json!(t0.elapsed().as_secs_f64()));
                match out {
                    Ok(out) => {
                        let passed = out.checks.iter().all(|c| c.passed);
                        let mut lines = vec![format!("[{}] {}", st.name, if passed { "ok" } else { "FAILED" })];
                        lines.extend(out.summary.iter().map(|l| format!("  {l}")));
                        lines.extend(out.checks.iter().filter(|c| !c.passed).map(|c| format!("  FAILED {}: {}", c.name, c.detail)));
                        for l in &lines {
                            println!("{l}");
                        }
                        records.push(StageRecord {
                            name: st.name.clone(),
                            stage: st.kind.kind_name(),
                            grid: st.grid,
                            ladder: st.ladder.values().to_vec(),
                            passed,
                            warnings: out.warnings,
                            checks: out.checks,
                            result: out.result,
                        });
                    }
                    Err(e) => {
                        error = Some(RunError::Stage {
                            stage: st.name.clone(),
                            source: Box::new(e),
                        });
                        break;
                    }
                }
            }
        }
    }
    let timings = Timings {
        setup,
        total: start.elapsed().as_secs_f64(),
        stages: &timings,
    };
    flush_report(out_dir, cfg, &records, timings, error.as_ref())?;
    let passed = error.is_none() && records.iter().all(|r| r.passed);
    match &error {
        Some(e) => write_marker(out_dir, &e.to_string())?,
        None if !passed => write_marker(out_dir, "one or more checks failed")?,
        None => {}
    }
    Ok(RunOutcome { passed, error })
}
