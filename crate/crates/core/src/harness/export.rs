use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::run::{aggregate_runs, AggregateTable, ColumnStats, RunTrace};
use crate::error::{Error, Result};
use crate::theory::{convergence_verdict, Verdict};
use crate::vector::ParamVector;

pub const CSV_HEADER: [&str; 12] = [
    "step",
    "epoch",
    "batch_size",
    "lr",
    "minibatch_loss",
    "full_loss",
    "sam_grad_norm",
    "noise_norm",
    "noise_mean",
    "noise_se",
    "G_hat",
    "G_perp_hat",
];

/// Columns summarized in aggregate CSVs, each as `_mean`, `_min`, `_max`.
pub const AGGREGATE_COLUMNS: [&str; 8] = [
    "minibatch_loss",
    "full_loss",
    "sam_grad_norm",
    "noise_norm",
    "noise_mean",
    "noise_se",
    "G_hat",
    "G_perp_hat",
];

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes one row per step; unsampled diagnostic cells are empty.
pub fn export_trace_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(CSV_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.step.to_string(),
            r.epoch.to_string(),
            r.batch_size.to_string(),
            r.lr.to_string(),
            r.minibatch_loss.to_string(),
            cell(r.full_loss),
            cell(r.sam_grad_norm),
            cell(r.noise_norm),
            cell(r.noise_mean),
            cell(r.noise_se),
            cell(r.g_hat),
            cell(r.g_perp_hat),
        ])?;
    }
    finish(w, path)
}

pub fn export_aggregate_csv(table: &AggregateTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header: Vec<String> = ["step", "epoch", "batch_size", "lr"].map(String::from).to_vec();
    for c in AGGREGATE_COLUMNS {
        for s in ["mean", "min", "max"] {
            header.push(format!("{c}_{s}"));
        }
    }
    w.write_record(&header)?;
    for r in &table.rows {
        let mut row = vec![r.step.to_string(), r.epoch.to_string(), r.batch_size.to_string(), r.lr.to_string()];
        let columns = [
            Some(r.minibatch_loss),
            r.full_loss,
            r.sam_grad_norm,
            r.noise_norm,
            r.noise_mean,
            r.noise_se,
            r.g_hat,
            r.g_perp_hat,
        ];
        for c in columns {
            row.push(cell(c.map(|s| s.mean)));
            row.push(cell(c.map(|s| s.min)));
            row.push(cell(c.map(|s| s.max)));
        }
        w.write_record(&row)?;
    }
    finish(w, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_sharpness: Option<f64>,
    pub final_loss: f64,
    pub test_loss: f64,
    pub min_sam_grad_norm: Option<f64>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedSummary>,
    pub sharpness: Option<ColumnStats>,
    pub final_loss: ColumnStats,
    pub test_loss: ColumnStats,
    /// Verdict on the seed-averaged full SAM-gradient norm at the configured
    /// epsilon.
    pub verdict: Option<Verdict>,
}

impl RunSummary {
    pub fn new(config: &RunConfig, traces: &[RunTrace], aggregate: &AggregateTable) -> Result<Self> {
        let verdict = match config.epsilon {
            Some(eps) => Some(convergence_verdict(traces, eps)?),
            None => None,
        };
        let runs = traces
            .iter()
            .map(|t| SeedSummary {
                seed: t.seed,
                final_sharpness: t.final_sharpness,
                final_loss: t.final_loss,
                test_loss: t.test_loss,
                min_sam_grad_norm: t.records.iter().filter_map(|r| r.sam_grad_norm).reduce(f64::min),
                wall_clock_secs: t.wall_clock_secs,
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            config_hash: aggregate.config_hash.clone(),
            seeds: aggregate.seeds.clone(),
            runs,
            sharpness: aggregate.sharpness,
            final_loss: aggregate.final_loss,
            test_loss: aggregate.test_loss,
            verdict,
        })
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Final iterate of one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    pub seed: u64,
    pub x: ParamVector,
}

impl Checkpoint {
    pub fn of(trace: &RunTrace) -> Self {
        Self {
            config_hash: trace.config_hash.clone(),
            seed: trace.seed,
            x: trace.final_x.clone(),
        }
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `trace_seed{S}.csv` and `checkpoint_seed{S}.json` per seed, then
/// `aggregate.csv` and `summary.json`, into `dir`.
pub fn write_run_dir(dir: &Path, config: &RunConfig, traces: &[RunTrace]) -> Result<RunSummary> {
    let aggregate = aggregate_runs(traces)?;
    for t in traces {
        export_trace_csv(t, &dir.join(format!("trace_seed{}.csv", t.seed)))?;
        write_json(&Checkpoint::of(t), &dir.join(format!("checkpoint_seed{}.json", t.seed)))?;
    }
    export_aggregate_csv(&aggregate, &dir.join("aggregate.csv"))?;
    let summary = RunSummary::new(config, traces, &aggregate)?;
    write_json(&summary, &dir.join("summary.json"))?;
    Ok(summary)
}
