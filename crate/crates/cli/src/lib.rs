//! Experiment runner: parses a JSON config, expands its sweep, evaluates
//! every point on a thread pool and writes results atomically.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crit_cycle_core::export::{Cell, CsvTable};
use rayon::prelude::*;

use config::{ExperimentConfig, SweepPoint};
use experiments::PointOutput;
use output::{PointRecord, PointStatus, RunManifest};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Evaluates every point. Results come back in sweep order whatever the
/// pool size, and each point is computed independently of the others.
pub fn evaluate(cfg: &ExperimentConfig, jobs: usize) -> Vec<(SweepPoint, Result<PointOutput, String>)> {
    let points = cfg.points();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let r = std::panic::catch_unwind(|| experiments::run_point(cfg, p))
                    .unwrap_or_else(|_| Err("internal panic while evaluating point".to_string()));
                (*p, r)
            })
            .collect()
    })
}

/// Runs the experiment and writes `summary.csv`, `summary.json`, the
/// per-point files and `manifest.json` into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path, jobs: usize, warnings: Vec<String>) -> std::io::Result<RunManifest> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    std::fs::create_dir_all(out)?;
    let results = evaluate(cfg, jobs);

    let mut header = vec!["point"];
    header.extend_from_slice(experiments::summary_header(cfg.experiment));
    let mut table = CsvTable::new(&header);
    let mut records = Vec::with_capacity(results.len());
    let mut json_records = Vec::with_capacity(results.len());
    for (point, result) in results {
        match result {
            Ok(po) => {
                for row in po.rows {
                    let mut full = vec![Cell::from(point.index)];
                    full.extend(row);
                    table.push(full);
                }
                let mut files = Vec::new();
                for (name, contents) in &po.files {
                    output::write_atomic(out, name, contents.as_bytes())?;
                    files.push(name.clone());
                }
                records.push(PointRecord { point, status: PointStatus::Ok, error: None, files });
                json_records.push((point, Ok(po.record)));
            }
            Err(e) => {
                records.push(PointRecord { point, status: PointStatus::Failed, error: Some(e.clone()), files: vec![] });
                json_records.push((point, Err(e)));
            }
        }
    }
    output::write_atomic(out, "summary.csv", table.render().as_bytes())?;
    output::write_atomic(out, "summary.json", output::summary_json(&json_records).as_bytes())?;

    let failed = records.iter().filter(|r| r.status == PointStatus::Failed).count();
    let manifest = RunManifest {
        schema_version: config::SCHEMA_VERSION,
        experiment: cfg.experiment.name().to_string(),
        config_hash: cfg.hash(),
        code_version: CODE_VERSION.to_string(),
        jobs,
        started_unix_s,
        wall_time_s: started.elapsed().as_secs_f64(),
        warnings,
        points_ok: records.len() - failed,
        points_failed: failed,
        points: records,
    };
    output::write_atomic(out, "manifest.json", manifest.to_json().as_bytes())?;
    Ok(manifest)
}
