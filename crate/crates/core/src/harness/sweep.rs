use rayon::prelude::*;
use serde_json::Value;

use super::config::RunConfig;
use super::run::{aggregate_runs, run_prepared, AggregateTable, RunTrace};
use crate::error::{Error, Result};

/// Keys a grid may vary. `ensemble.<field>` accepts any field of the
/// configured ensemble kind.
pub const GRID_KEYS: [&str; 15] = [
    "sam.rho",
    "sam.alpha",
    "sam.sampling",
    "sam.zero_grad_threshold",
    "sam.base_update",
    "lr.kind",
    "lr.lo",
    "lr.hi",
    "lr.warmup_epochs",
    "lr.init_lr",
    "batch.stages",
    "epochs",
    "diagnostics.cadence",
    "diagnostics.noise_trials",
    "epsilon",
];

fn invalid_key(key: &str, base: &Value) -> Error {
    let mut valid: Vec<String> = GRID_KEYS.iter().map(|k| k.to_string()).collect();
    if let Some(ens) = base.get("ensemble").and_then(Value::as_object) {
        valid.extend(ens.keys().filter(|k| *k != "kind").map(|k| format!("ensemble.{k}")));
    }
    Error::Config(format!("unknown grid key `{key}`; valid keys: {}", valid.join(", ")))
}

/// Returns a copy of `config` with `key` set to `value`.
pub fn apply_override(config: &RunConfig, key: &str, value: &Value) -> Result<RunConfig> {
    let mut root = serde_json::to_value(config)?;
    let is_ensemble_field = key
        .strip_prefix("ensemble.")
        .is_some_and(|field| field != "kind" && root["ensemble"].get(field).is_some());
    if !GRID_KEYS.contains(&key) && !is_ensemble_field {
        return Err(invalid_key(key, &root));
    }
    let mut slot = &mut root;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .map(|obj| obj.entry(part.to_string()).or_insert(Value::Null))
            .ok_or_else(|| Error::Config(format!("cannot set `{key}`")))?;
    }
    *slot = value.clone();
    serde_json::from_value(root).map_err(|e| Error::Config(format!("{key} = {value}: {e}")))
}

/// Parses `KEY=V1,V2,...`. Values are JSON where they parse as JSON and
/// plain strings otherwise; commas inside brackets do not split.
pub fn parse_grid_arg(arg: &str) -> Result<(String, Vec<Value>)> {
    let (key, rest) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("grid entry `{arg}` is not KEY=V1,V2,...")))?;
    let mut values = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let bytes = rest.as_bytes();
    for i in 0..=bytes.len() {
        let c = bytes.get(i).copied();
        match c {
            Some(b'[') | Some(b'{') => depth += 1,
            Some(b']') | Some(b'}') => depth -= 1,
            Some(b',') | None if depth == 0 => {
                let token = rest[start..i].trim();
                if token.is_empty() {
                    return Err(Error::Config(format!("empty value in grid entry `{arg}`")));
                }
                values.push(serde_json::from_str(token).unwrap_or_else(|_| Value::String(token.to_string())));
                start = i + 1;
            }
            _ => {}
        }
    }
    Ok((key.trim().to_string(), values))
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub assignment: Vec<(String, Value)>,
    pub config: RunConfig,
    pub traces: Vec<RunTrace>,
    pub aggregate: AggregateTable,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// Entry indices by ascending mean terminal full loss.
    pub by_final_loss: Vec<usize>,
    /// Entry indices by ascending mean sharpness; entries without sharpness
    /// come last.
    pub by_sharpness: Vec<usize>,
}

impl SweepResult {
    pub fn run_count(&self) -> usize {
        self.entries.iter().map(|e| e.traces.len()).sum()
    }
}

fn assignments(grid: &[(String, Vec<Value>)]) -> Vec<Vec<(String, Value)>> {
    grid.iter().fold(vec![Vec::new()], |acc, (key, values)| {
        acc.iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push((key.clone(), v.clone()));
                    next
                })
            })
            .collect()
    })
}

/// Runs the Cartesian product of `grid` over every seed of `base`. All
/// configs are validated before any run starts.
pub fn sweep(base: &RunConfig, grid: &[(String, Vec<Value>)]) -> Result<SweepResult> {
    let mut planned = Vec::new();
    for assignment in assignments(grid) {
        let mut cfg = base.clone();
        for (key, value) in &assignment {
            cfg = apply_override(&cfg, key, value)?;
        }
        let prepared = cfg.prepare()?;
        planned.push((assignment, cfg, prepared));
    }
    let jobs: Vec<(usize, u64)> = planned
        .iter()
        .enumerate()
        .flat_map(|(i, (_, cfg, _))| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let traces: Vec<(usize, RunTrace)> = jobs
        .par_iter()
        .map(|&(i, seed)| run_prepared(&planned[i].1, &planned[i].2, seed).map(|t| (i, t)))
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(planned.len());
    for (i, (assignment, config, _)) in planned.into_iter().enumerate() {
        let own: Vec<RunTrace> = traces.iter().filter(|(j, _)| *j == i).map(|(_, t)| t.clone()).collect();
        let aggregate = aggregate_runs(&own)?;
        entries.push(SweepEntry {
            assignment,
            config,
            traces: own,
            aggregate,
        });
    }
    let mut by_final_loss: Vec<usize> = (0..entries.len()).collect();
    by_final_loss.sort_by(|&a, &b| {
        entries[a]
            .aggregate
            .final_loss
            .mean
            .total_cmp(&entries[b].aggregate.final_loss.mean)
    });
    let sharp = |i: usize| entries[i].aggregate.sharpness.map_or(f64::INFINITY, |s| s.mean);
    let mut by_sharpness: Vec<usize> = (0..entries.len()).collect();
    by_sharpness.sort_by(|&a, &b| sharp(a).total_cmp(&sharp(b)));
    Ok(SweepResult {
        entries,
        by_final_loss,
        by_sharpness,
    })
}
