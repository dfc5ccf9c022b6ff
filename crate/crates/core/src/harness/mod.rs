//! Seeded Monte Carlo sweeps over the model modules.
//!
//! Each (grid point, trial) pair draws its generator from
//! [`child_seed`](crate::rng::child_seed) and runs on the rayon pool; rows are
//! collected in index order, so the record does not depend on the number of
//! threads.

pub mod cli;
mod config;
mod models;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, Model, SweepAxis};
pub use models::GLOBAL_CASCADE_FRACTION;

use crate::rng::child_seed;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub grid: usize,
    pub trial: usize,
    pub seed: u64,
    /// Values of the swept parameters, in axis order.
    pub point: Vec<f64>,
    /// One value per [`Model::metrics`] entry; empty when the trial failed.
    pub metrics: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    /// `None` below two observations.
    pub stderr: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// Sums in the given order. `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = (values.len() > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Some(Stats {
            count: values.len(),
            mean,
            stderr,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid: usize,
    pub params: BTreeMap<String, f64>,
    pub failed: usize,
    /// `None` where no trial produced a finite value.
    pub metrics: BTreeMap<String, Option<Stats>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub config_digest: String,
    pub rows: Vec<TrialRow>,
    pub summary: Vec<GridSummary>,
    pub elapsed_seconds: f64,
}

/// Runs every trial at every grid point. Only an invalid configuration is an
/// error; a failing trial becomes a row carrying its message.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let points: Vec<_> = (0..config.grid_size()).map(|g| config.grid_point(g)).collect();
    let prepared: Vec<_> = points.par_iter().map(|p| models::prepare(config, p)).collect();
    let trials = config.trials;
    let rows: Vec<TrialRow> = (0..points.len() * trials)
        .into_par_iter()
        .map(|k| {
            let (grid, trial) = (k / trials, k % trials);
            let seed = child_seed(config.seed, grid as u64, trial as u64);
            let outcome = match &prepared[grid] {
                Ok(p) => models::run_trial(config, &points[grid], *p, seed),
                Err(e) => Err(crate::Error::Parameter(e.to_string())),
            };
            let (metrics, error) = match outcome {
                Ok(m) => (m, None),
                Err(e) => (Vec::new(), Some(e.to_string())),
            };
            TrialRow {
                grid,
                trial,
                seed,
                point: config.sweep.iter().map(|a| points[grid][&a.param]).collect(),
                metrics,
                error,
            }
        })
        .collect();
    let summary = aggregate(config, &rows);
    Ok(RunRecord {
        config_digest: config.digest(),
        config: config.clone(),
        rows,
        summary,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Per grid point statistics of every metric, folding rows in trial order.
/// Non-finite values and failed trials are left out of the statistics.
pub fn aggregate(config: &ExperimentConfig, rows: &[TrialRow]) -> Vec<GridSummary> {
    let names = config.model.metrics();
    let mut ordered: Vec<&TrialRow> = rows.iter().collect();
    ordered.sort_by_key(|r| (r.grid, r.trial));
    (0..config.grid_size())
        .map(|g| {
            let group: Vec<&TrialRow> = ordered.iter().copied().filter(|r| r.grid == g).collect();
            let metrics = names
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    let values: Vec<f64> = group
                        .iter()
                        .filter(|r| r.error.is_none())
                        .map(|r| r.metrics[k])
                        .filter(|v| v.is_finite())
                        .collect();
                    (name.to_string(), Stats::of(&values))
                })
                .collect();
            GridSummary {
                grid: g,
                params: config.grid_point(g),
                failed: group.iter().filter(|r| r.error.is_some()).count(),
                metrics,
            }
        })
        .collect()
}

/// Writes `rows.csv`, `summary.json` and `timing.json` into `dir`. The first
/// two depend only on the configuration.
pub fn write_record(record: &RunRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let config = &record.config;
    let mut w = csv::Writer::from_path(dir.join("rows.csv"))?;
    let mut header = vec!["grid".to_string(), "trial".to_string(), "seed".to_string()];
    header.extend(config.sweep.iter().map(|a| a.param.clone()));
    header.extend(config.model.metrics().iter().map(|m| m.to_string()));
    header.push("error".to_string());
    w.write_record(&header)?;
    for row in &record.rows {
        let mut fields = vec![row.grid.to_string(), row.trial.to_string(), row.seed.to_string()];
        fields.extend(row.point.iter().map(f64::to_string));
        if row.error.is_some() {
            fields.extend(config.model.metrics().iter().map(|_| String::new()));
        } else {
            fields.extend(row.metrics.iter().map(f64::to_string));
        }
        fields.push(row.error.clone().unwrap_or_default());
        w.write_record(&fields)?;
    }
    w.flush()?;

    let summary = serde_json::json!({
        "config": config,
        "config_digest": record.config_digest,
        "rows": record.rows.len(),
        "grid": record.summary,
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    let timing = serde_json::json!({
        "elapsed_seconds": record.elapsed_seconds,
        "threads": rayon::current_num_threads(),
    });
    fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
    Ok(())
}
