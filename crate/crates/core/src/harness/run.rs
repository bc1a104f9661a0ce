use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Prepared, RunConfig};
use crate::diagnostics::{adaptive_sharpness, mc_noise_norm, noise_sample_with, FullSam, GradBoundEstimates, GradNorms};
use crate::ensemble::{batch_loss, full_loss, Batch, BatchSampler, LossEnsemble};
use crate::error::{Error, Result};
use crate::rng::{stream, substream, Purpose};
use crate::sam::{self, Stepper};
use crate::vector::ParamVector;

/// One optimizer step; diagnostic fields are `None` off the cadence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub minibatch_loss: f64,
    pub full_loss: Option<f64>,
    /// `‖∇f̂^SAM_{S,ρ}(x_t)‖`
    pub sam_grad_norm: Option<f64>,
    /// `η_t‖ω_t‖` for the batch actually used at this step.
    pub noise_norm: Option<f64>,
    /// Monte-Carlo mean and standard error of `η_t‖ω_t‖` at `x_t`.
    pub noise_mean: Option<f64>,
    pub noise_se: Option<f64>,
    pub g_hat: Option<f64>,
    pub g_perp_hat: Option<f64>,
    /// `f_S(x_t + ε̂_{S_t,ρ}(x_t))`
    pub perturbed_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub config_hash: String,
    pub seed: u64,
    pub records: Vec<StepRecord>,
    pub final_sharpness: Option<f64>,
    /// `f_S(x_T)` on the training ensemble.
    pub final_loss: f64,
    /// Loss at `x_T` on a held-out ensemble from the same generator.
    pub test_loss: f64,
    pub final_x: ParamVector,
    pub wall_clock_secs: f64,
}

fn mc_seed(seed: u64, step: usize) -> u64 {
    use rand::RngCore;
    substream(seed, Purpose::Diagnostics, step as u64).next_u64()
}

/// Runs the GSAM loop for one seed.
pub fn run(config: &RunConfig, seed: u64) -> Result<RunTrace> {
    let prepared = config.prepare()?;
    run_prepared(config, &prepared, seed)
}

pub(crate) fn run_prepared(config: &RunConfig, p: &Prepared, seed: u64) -> Result<RunTrace> {
    let started = Instant::now();
    let ens = &p.ensemble;
    let cfg = &config.sam;
    let n = ens.sample_count();
    let mut sampler = BatchSampler::new(n, cfg.sampling, stream(seed, Purpose::Batches));
    let mut stepper = Stepper::new(cfg.base_update, ens.dim());
    let mut x = ens.initial_point();
    let mut bounds = GradBoundEstimates::default();
    let mut records = Vec::with_capacity(p.total_steps);
    let mut step = 0;

    for (epoch, b) in p.batch.epoch_sizes().enumerate() {
        let full_batch = b == n;
        if !full_batch {
            sampler.start_epoch();
        }
        for _ in 0..n.div_ceil(b) {
            let drawn = (!full_batch).then(|| sampler.next_batch(b));
            let batch = drawn.as_ref().map_or(Batch::Full, |m| m.as_batch());
            let eta = p.lr.lr_at_position(step, epoch)?;
            let eval = sam::evaluate(ens, &x, batch, cfg)?;
            let mut record = StepRecord {
                step,
                epoch,
                batch_size: b,
                lr: eta,
                minibatch_loss: batch_loss(ens, &x, batch)?,
                full_loss: None,
                sam_grad_norm: None,
                noise_norm: None,
                noise_mean: None,
                noise_se: None,
                g_hat: None,
                g_perp_hat: None,
                perturbed_loss: None,
            };
            if p.is_diagnostic_step(step) {
                let full = FullSam::at(ens, &x, cfg)?;
                let (noise, _) = noise_sample_with(ens, &full, &x, batch, cfg, eta)?;
                bounds = bounds.absorb(&GradNorms::from_evals(ens, &x, &full, &eval, cfg)?);
                record.full_loss = Some(full_loss(ens, &x)?);
                record.sam_grad_norm = Some(full.sam_gradient().norm());
                record.noise_norm = Some(noise.eta_times_norm);
                record.perturbed_loss = Some(full_loss(ens, &x.add(&eval.perturbation))?);
                record.g_hat = Some(bounds.g_hat);
                record.g_perp_hat = Some(bounds.g_perp_hat);
                if config.diagnostics.noise_trials > 0 {
                    let stats = mc_noise_norm(ens, &x, b, cfg, eta, config.diagnostics.noise_trials, mc_seed(seed, step))?;
                    record.noise_mean = Some(stats.mean);
                    record.noise_se = Some(stats.std_error);
                }
            }
            let (d, _) = sam::direction_from(&eval, cfg)?;
            x = stepper.step(&x, &d, eta, step)?;
            records.push(record);
            step += 1;
        }
    }
    debug_assert_eq!(step, p.total_steps);

    let final_sharpness = match &config.diagnostics.sharpness {
        Some(spec) => Some(adaptive_sharpness(ens, &x, spec, seed)?),
        None => None,
    };
    let holdout = config.ensemble.build_holdout()?;
    Ok(RunTrace {
        config_hash: config.hash(),
        seed,
        records,
        final_sharpness,
        final_loss: full_loss(ens, &x)?,
        test_loss: full_loss(&holdout, &x)?,
        final_x: x,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Runs every configured seed concurrently; traces come back in seed order.
pub fn run_seeds(config: &RunConfig) -> Result<Vec<RunTrace>> {
    let prepared = config.prepare()?;
    config
        .seeds
        .par_iter()
        .map(|&seed| run_prepared(config, &prepared, seed))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl ColumnStats {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut count = 0usize;
        let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        (count > 0).then(|| Self {
            mean: sum / count as f64,
            min,
            max,
        })
    }

    /// Stats of a column that must be present in every trace.
    fn of_all(values: impl IntoIterator<Item = Option<f64>>) -> Option<Self> {
        let values: Option<Vec<f64>> = values.into_iter().collect();
        values.and_then(Self::of)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub step: usize,
    pub epoch: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub minibatch_loss: ColumnStats,
    pub full_loss: Option<ColumnStats>,
    pub sam_grad_norm: Option<ColumnStats>,
    pub noise_norm: Option<ColumnStats>,
    pub noise_mean: Option<ColumnStats>,
    pub noise_se: Option<ColumnStats>,
    pub g_hat: Option<ColumnStats>,
    pub g_perp_hat: Option<ColumnStats>,
    pub perturbed_loss: Option<ColumnStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<AggregateRow>,
    pub sharpness: Option<ColumnStats>,
    pub final_loss: ColumnStats,
    pub test_loss: ColumnStats,
}

/// Per-step mean, min and max across traces of one config.
pub fn aggregate_runs(traces: &[RunTrace]) -> Result<AggregateTable> {
    let first = traces
        .first()
        .ok_or_else(|| Error::NoData("no traces to aggregate".into()))?;
    for t in traces {
        if t.config_hash != first.config_hash {
            return Err(Error::Config(format!(
                "cannot aggregate traces of different configs ({} vs {})",
                first.config_hash, t.config_hash
            )));
        }
        if t.records.len() != first.records.len() {
            return Err(Error::Config("traces differ in length".into()));
        }
    }
    let rows = (0..first.records.len())
        .map(|i| {
            let at = |f: fn(&StepRecord) -> Option<f64>| ColumnStats::of_all(traces.iter().map(|t| f(&t.records[i])));
            let r = &first.records[i];
            AggregateRow {
                step: r.step,
                epoch: r.epoch,
                batch_size: r.batch_size,
                lr: r.lr,
                minibatch_loss: at(|r| Some(r.minibatch_loss)).expect("always present"),
                full_loss: at(|r| r.full_loss),
                sam_grad_norm: at(|r| r.sam_grad_norm),
                noise_norm: at(|r| r.noise_norm),
                noise_mean: at(|r| r.noise_mean),
                noise_se: at(|r| r.noise_se),
                g_hat: at(|r| r.g_hat),
                g_perp_hat: at(|r| r.g_perp_hat),
                perturbed_loss: at(|r| r.perturbed_loss),
            }
        })
        .collect();
    Ok(AggregateTable {
        config_hash: first.config_hash.clone(),
        seeds: traces.iter().map(|t| t.seed).collect(),
        rows,
        sharpness: ColumnStats::of_all(traces.iter().map(|t| t.final_sharpness)),
        final_loss: ColumnStats::of(traces.iter().map(|t| t.final_loss)).expect("non-empty"),
        test_loss: ColumnStats::of(traces.iter().map(|t| t.test_loss)).expect("non-empty"),
    })
}
