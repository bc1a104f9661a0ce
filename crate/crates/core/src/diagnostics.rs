//! Search-direction noise, gradient-variance estimators, running gradient
//! bounds and the worst-case ℓ∞ adaptive sharpness.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{batch_gradient, full_gradient, full_loss, Batch, LossEnsemble};
use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::sam::{self, SamConfig, SamEval};
use crate::vector::ParamVector;

/// One draw of the search-direction noise at a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    /// `ω = ω̂ + α v⊥`
    pub omega: ParamVector,
    /// `ω̂ = ∇f̂^SAM_{S,ρ}(x) − ∇f̂^SAM_{S_t,ρ}(x)`
    pub omega_hat: ParamVector,
    /// Component of `∇f_{S_t}(x)` orthogonal to the batch SAM gradient.
    pub perpendicular: ParamVector,
    pub norm: f64,
    pub eta_times_norm: f64,
}

/// Full-batch SAM quantities at a point, reused across many batch draws.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSam {
    pub eval: SamEval,
}

impl FullSam {
    pub fn at(ens: &(impl LossEnsemble + ?Sized), x: &ParamVector, cfg: &SamConfig) -> Result<Self> {
        Ok(Self {
            eval: sam::evaluate(ens, x, Batch::Full, cfg)?,
        })
    }

    pub fn sam_gradient(&self) -> &ParamVector {
        &self.eval.sam_gradient
    }
}

fn noise_from(full: &FullSam, batch_eval: &SamEval, cfg: &SamConfig, eta: f64) -> Result<NoiseSample> {
    let (_, split) = sam::direction_from(batch_eval, cfg)?;
    let omega_hat = full.eval.sam_gradient.sub(&batch_eval.sam_gradient);
    let omega = if cfg.alpha == 0.0 {
        omega_hat.clone()
    } else {
        omega_hat.axpy(cfg.alpha, &split.perpendicular)
    };
    let norm = omega.norm();
    Ok(NoiseSample {
        omega,
        omega_hat,
        perpendicular: split.perpendicular,
        norm,
        eta_times_norm: eta * norm,
    })
}

pub fn noise_sample(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    batch: Batch<'_>,
    cfg: &SamConfig,
    eta: f64,
) -> Result<NoiseSample> {
    let full = FullSam::at(ens, x, cfg)?;
    let batch_eval = sam::evaluate(ens, x, batch, cfg)?;
    noise_from(&full, &batch_eval, cfg, eta)
}

/// Noise sample against a precomputed full SAM evaluation.
pub fn noise_sample_with(
    ens: &(impl LossEnsemble + ?Sized),
    full: &FullSam,
    x: &ParamVector,
    batch: Batch<'_>,
    cfg: &SamConfig,
    eta: f64,
) -> Result<(NoiseSample, SamEval)> {
    let batch_eval = sam::evaluate(ens, x, batch, cfg)?;
    let sample = noise_from(full, &batch_eval, cfg, eta)?;
    Ok((sample, batch_eval))
}

/// Monte-Carlo summary of `η‖ω‖` over with-replacement batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseStats {
    pub mean: f64,
    pub std_error: f64,
    /// Mean and standard error of `‖ω‖²` (without `η`).
    pub mean_sq: f64,
    pub mean_sq_se: f64,
    /// Largest `‖∇f_{S_t⊥}(x)‖` seen across the trials.
    pub max_perp_norm: f64,
    pub trials: usize,
}

pub const MIN_TRIALS: usize = 100;

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn draw_indices(rng: &mut impl Rng, n: usize, b: usize) -> Vec<usize> {
    (0..b).map(|_| rng.random_range(0..n)).collect()
}

fn check_trials(trials: usize, b: usize, n: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "Monte-Carlo estimates need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if b == 0 || b > n {
        return Err(Error::OutOfRange {
            what: "batch size",
            value: b,
            lo: 1,
            hi: n + 1,
        });
    }
    Ok(())
}

/// Mean and standard error of `η‖ω‖` over `trials` i.i.d. batches of size
/// `b` at fixed `x`. `b = n` uses the full sample set.
///
/// Trial `k` draws its batch from its own stream keyed by `(seed, k)`, so the
/// result does not depend on the thread count.
pub fn mc_noise_norm(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    b: usize,
    cfg: &SamConfig,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<NoiseStats> {
    let n = ens.sample_count();
    check_trials(trials, b, n)?;
    let full = FullSam::at(ens, x, cfg)?;
    let samples: Vec<NoiseSample> = (0..trials)
        .into_par_iter()
        .map(|k| {
            if b == n {
                return noise_sample_with(ens, &full, x, Batch::Full, cfg, eta).map(|(s, _)| s);
            }
            let mut rng = substream(seed, Purpose::MonteCarlo, k as u64);
            let idx = draw_indices(&mut rng, n, b);
            noise_sample_with(ens, &full, x, Batch::Indices(&idx), cfg, eta).map(|(s, _)| s)
        })
        .collect::<Result<_>>()?;
    let scaled: Vec<f64> = samples.iter().map(|s| s.eta_times_norm).collect();
    let squares: Vec<f64> = samples.iter().map(|s| s.norm * s.norm).collect();
    let (mean, std_error) = mean_and_se(&scaled);
    let (mean_sq, mean_sq_se) = mean_and_se(&squares);
    let max_perp_norm = samples
        .iter()
        .map(|s| s.perpendicular.norm())
        .fold(0.0, f64::max);
    Ok(NoiseStats {
        mean,
        std_error,
        mean_sq,
        mean_sq_se,
        max_perp_norm,
        trials,
    })
}

/// Monte-Carlo estimate of `E‖∇f_{S_t}(x) − ∇f_S(x)‖²` and of
/// `‖E ∇f_{S_t}(x) − ∇f_S(x)‖` over with-replacement batches of size `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceStats {
    pub mean_sq_dev: f64,
    pub std_error: f64,
    pub bias_norm: f64,
    pub trials: usize,
}

pub fn mc_gradient_variance(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    b: usize,
    trials: usize,
    seed: u64,
) -> Result<VarianceStats> {
    let n = ens.sample_count();
    check_trials(trials, b, n)?;
    let full = full_gradient(ens, x)?;
    let grads: Vec<ParamVector> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, Purpose::MonteCarlo, k as u64);
            let idx = draw_indices(&mut rng, n, b);
            batch_gradient(ens, x, Batch::Indices(&idx))
        })
        .collect::<Result<_>>()?;
    let devs: Vec<f64> = grads.iter().map(|g| g.sub(&full).norm_sq()).collect();
    let (mean_sq_dev, std_error) = mean_and_se(&devs);
    let mut mean_grad = ParamVector::zeros(ens.dim());
    for g in &grads {
        mean_grad = mean_grad.axpy(1.0 / trials as f64, g);
    }
    Ok(VarianceStats {
        mean_sq_dev,
        std_error,
        bias_norm: mean_grad.sub(&full).norm(),
        trials,
    })
}

/// Running maxima of the gradient norms entering `G` and `G⊥`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GradBoundEstimates {
    pub g_hat: f64,
    pub g_perp_hat: f64,
}

/// The four norms behind `G` plus the perpendicular norm behind `G⊥`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradNorms {
    /// `‖∇f_S(x + ε̂_{S_t,ρ}(x))‖`
    pub full_at_batch_perturbation: f64,
    /// `‖∇f̂^SAM_{S_t,ρ}(x)‖`
    pub batch_sam: f64,
    /// `‖∇f̂^SAM_{S,ρ}(x)‖`
    pub full_sam: f64,
    /// `‖∇f_{S_t⊥}(x)‖`
    pub perpendicular: f64,
}

impl GradNorms {
    pub fn measure(
        ens: &(impl LossEnsemble + ?Sized),
        x: &ParamVector,
        batch: Batch<'_>,
        cfg: &SamConfig,
    ) -> Result<Self> {
        let full = FullSam::at(ens, x, cfg)?;
        let batch_eval = sam::evaluate(ens, x, batch, cfg)?;
        Self::from_evals(ens, x, &full, &batch_eval, cfg)
    }

    pub fn from_evals(
        ens: &(impl LossEnsemble + ?Sized),
        x: &ParamVector,
        full: &FullSam,
        batch_eval: &SamEval,
        cfg: &SamConfig,
    ) -> Result<Self> {
        let (_, split) = sam::direction_from(batch_eval, cfg)?;
        let shifted = full_gradient(ens, &x.add(&batch_eval.perturbation))?;
        Ok(Self {
            full_at_batch_perturbation: shifted.norm(),
            batch_sam: batch_eval.sam_gradient.norm(),
            full_sam: full.eval.sam_gradient.norm(),
            perpendicular: split.perpendicular.norm(),
        })
    }
}

impl GradBoundEstimates {
    pub fn absorb(self, norms: &GradNorms) -> Self {
        let g = norms
            .full_at_batch_perturbation
            .max(norms.batch_sam)
            .max(norms.full_sam)
            .max(norms.perpendicular);
        Self {
            g_hat: self.g_hat.max(g),
            g_perp_hat: self.g_perp_hat.max(norms.perpendicular),
        }
    }
}

pub fn grad_bound_update(
    est: GradBoundEstimates,
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    batch: Batch<'_>,
    cfg: &SamConfig,
) -> Result<GradBoundEstimates> {
    Ok(est.absorb(&GradNorms::measure(ens, x, batch, cfg)?))
}

/// Parameters of the projected sign-gradient ascent over
/// `{δ : ‖δ ⊘ c‖_∞ ≤ radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SharpnessSpec {
    pub radius: f64,
    /// Per-coordinate scaling `c`; all ones when unset.
    pub scaling: Option<Vec<f64>>,
    pub ascent_steps: usize,
    pub restarts: usize,
    pub step_fraction: f64,
}

impl Default for SharpnessSpec {
    fn default() -> Self {
        Self {
            radius: 0.0002,
            scaling: None,
            ascent_steps: 20,
            restarts: 5,
            step_fraction: 0.25,
        }
    }
}

impl SharpnessSpec {
    pub fn with_radius(radius: f64) -> Self {
        Self {
            radius,
            ..Self::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.radius >= 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sharpness radius must be >= 0, got {}",
                self.radius
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("sharpness needs at least one restart".into()));
        }
        if !(self.step_fraction > 0.0) {
            return Err(Error::InvalidParameter("step_fraction must be > 0".into()));
        }
        if let Some(c) = &self.scaling {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.len(),
                });
            }
            if c.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidParameter("sharpness scaling must be positive".into()));
            }
        }
        Ok(())
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Largest `f_S(x + δ) − f_S(x)` found over the scaled ℓ∞ box. A lower
/// bound on the true maximum, and never negative.
pub fn adaptive_sharpness(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    spec: &SharpnessSpec,
    seed: u64,
) -> Result<f64> {
    let dim = ens.dim();
    x.check_dim(dim)?;
    spec.validate(dim)?;
    if spec.radius == 0.0 {
        return Ok(0.0);
    }
    let ones = vec![1.0; dim];
    let c = spec.scaling.as_deref().unwrap_or(&ones);
    let half_width: Vec<f64> = c.iter().map(|ci| spec.radius * ci).collect();
    let base = full_loss(ens, x)?;

    let best = (0..spec.restarts)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut delta = vec![0.0; dim];
            if r > 0 {
                let mut rng = substream(seed, Purpose::Sharpness, r as u64);
                for (d, w) in delta.iter_mut().zip(&half_width) {
                    *d = if rng.random::<bool>() { *w } else { -*w };
                }
            }
            let mut best = f64::NEG_INFINITY;
            for _ in 0..=spec.ascent_steps {
                let point = ParamVector::new(x.iter().zip(&delta).map(|(a, b)| a + b).collect());
                best = best.max(full_loss(ens, &point)?);
                let g = full_gradient(ens, &point)?;
                for ((d, w), gi) in delta.iter_mut().zip(&half_width).zip(g.iter()) {
                    *d = (*d + spec.step_fraction * w * sign(*gi)).clamp(-*w, *w);
                }
            }
            let point = ParamVector::new(x.iter().zip(&delta).map(|(a, b)| a + b).collect());
            Ok(best.max(full_loss(ens, &point)?))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((best - base).max(0.0))
}
