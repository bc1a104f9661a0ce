//! Mini-batch GSAM: perturbation, SAM gradient, gradient decomposition and
//! the update step. GSAM with `alpha = 0` is SAM; with `alpha = rho = 0` it
//! is plain SGD.

use serde::{Deserialize, Serialize};

use crate::ensemble::{batch_gradient, Batch, LossEnsemble, SamplingMode};
use crate::error::{Error, Result};
use crate::vector::ParamVector;

pub const DEFAULT_ZERO_GRAD_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseUpdate {
    /// `x + η d`
    #[default]
    Sgd,
    /// Bias-corrected Adam on the gradient `−d` with decoupled weight decay.
    Adam {
        beta1: f64,
        beta2: f64,
        weight_decay: f64,
        eps: f64,
    },
}

impl BaseUpdate {
    pub fn adam_default() -> Self {
        BaseUpdate::Adam {
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.0,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamConfig {
    /// Perturbation radius.
    pub rho: f64,
    /// Ascent-step control for the perpendicular component.
    pub alpha: f64,
    /// Fallback perturbation when the batch gradient vanishes; zero if unset.
    pub u: Option<ParamVector>,
    pub zero_grad_threshold: f64,
    pub base_update: BaseUpdate,
    pub sampling: SamplingMode,
}

impl Default for SamConfig {
    fn default() -> Self {
        Self {
            rho: 0.0,
            alpha: 0.0,
            u: None,
            zero_grad_threshold: DEFAULT_ZERO_GRAD_THRESHOLD,
            base_update: BaseUpdate::Sgd,
            sampling: SamplingMode::WithReplacement,
        }
    }
}

impl SamConfig {
    pub fn sgd() -> Self {
        Self::default()
    }

    pub fn sam(rho: f64) -> Self {
        Self {
            rho,
            ..Self::default()
        }
    }

    pub fn gsam(rho: f64, alpha: f64) -> Self {
        Self {
            rho,
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be >= 0, got {}", self.rho)));
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        if !(self.zero_grad_threshold > 0.0) {
            return Err(Error::InvalidParameter("zero_grad_threshold must be > 0".into()));
        }
        if let Some(u) = &self.u {
            u.check_dim(dim)?;
            if u.norm() > self.rho {
                return Err(Error::InvalidParameter(format!(
                    "fallback u has norm {} > rho = {}",
                    u.norm(),
                    self.rho
                )));
            }
        }
        if let BaseUpdate::Adam { beta1, beta2, eps, weight_decay } = self.base_update {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) || weight_decay < 0.0 {
                return Err(Error::InvalidParameter("adam needs beta in [0,1), eps > 0, weight_decay >= 0".into()));
            }
        }
        Ok(())
    }
}

/// `ε̂ = ρ g/‖g‖` when `‖g‖ > threshold`, else the fallback `u` (zero if
/// `None`).
pub fn perturbation(
    g: &ParamVector,
    rho: f64,
    u: Option<&ParamVector>,
    threshold: f64,
) -> Result<ParamVector> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be >= 0, got {rho}")));
    }
    let norm = g.norm();
    if norm > threshold {
        Ok(g.scaled(rho / norm))
    } else {
        match u {
            Some(u) => {
                u.check_dim(g.dim())?;
                if u.norm() > rho {
                    return Err(Error::InvalidParameter("fallback u lies outside the rho-ball".into()));
                }
                Ok(u.clone())
            }
            None => Ok(ParamVector::zeros(g.dim())),
        }
    }
}

/// Intermediate quantities of one SAM gradient evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SamEval {
    /// `∇f_{S_t}(x)`
    pub gradient: ParamVector,
    /// `ε̂_{S_t,ρ}(x)`
    pub perturbation: ParamVector,
    /// `∇f_{S_t}(x + ε̂)`
    pub sam_gradient: ParamVector,
}

pub fn evaluate(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    batch: Batch<'_>,
    cfg: &SamConfig,
) -> Result<SamEval> {
    let gradient = batch_gradient(ens, x, batch)?;
    let perturbation = perturbation(&gradient, cfg.rho, cfg.u.as_ref(), cfg.zero_grad_threshold)?;
    let sam_gradient = if cfg.rho == 0.0 {
        gradient.clone()
    } else {
        batch_gradient(ens, &x.add(&perturbation), batch)?
    };
    Ok(SamEval {
        gradient,
        perturbation,
        sam_gradient,
    })
}

/// `∇f̂^SAM_{S_t,ρ}(x)` over a mini-batch, or the full-batch SAM gradient
/// for [`Batch::Full`].
pub fn sam_gradient(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    batch: Batch<'_>,
    cfg: &SamConfig,
) -> Result<ParamVector> {
    evaluate(ens, x, batch, cfg).map(|e| e.sam_gradient)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub parallel: ParamVector,
    pub perpendicular: ParamVector,
}

/// Orthogonal split of `v` against `reference`. A reference with norm at
/// most `threshold` yields `parallel = 0`, `perpendicular = v`.
pub fn decompose(v: &ParamVector, reference: &ParamVector, threshold: f64) -> Result<Decomposition> {
    reference.check_dim(v.dim())?;
    let ref_norm_sq = reference.norm_sq();
    if ref_norm_sq.sqrt() <= threshold {
        return Ok(Decomposition {
            parallel: ParamVector::zeros(v.dim()),
            perpendicular: v.clone(),
        });
    }
    let parallel = reference.scaled(v.dot(reference) / ref_norm_sq);
    let perpendicular = v.sub(&parallel);
    Ok(Decomposition {
        parallel,
        perpendicular,
    })
}

/// Search direction from an evaluated SAM gradient:
/// `d = −(g_sam − α·v⊥)` with `v⊥` the part of `∇f_{S_t}(x)` orthogonal to
/// `g_sam`.
pub fn direction_from(eval: &SamEval, cfg: &SamConfig) -> Result<(ParamVector, Decomposition)> {
    let split = decompose(&eval.gradient, &eval.sam_gradient, cfg.zero_grad_threshold)?;
    let d = if cfg.alpha == 0.0 {
        eval.sam_gradient.scaled(-1.0)
    } else {
        eval.sam_gradient
            .axpy(-cfg.alpha, &split.perpendicular)
            .scaled(-1.0)
    };
    Ok((d, split))
}

pub fn direction(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    batch: Batch<'_>,
    cfg: &SamConfig,
) -> Result<ParamVector> {
    let eval = evaluate(ens, x, batch, cfg)?;
    direction_from(&eval, cfg).map(|(d, _)| d)
}

/// `x + η d`.
pub fn sgd_step(x: &ParamVector, d: &ParamVector, eta: f64) -> ParamVector {
    x.axpy(eta, d)
}

/// Applies the configured base update; holds Adam moments for one run.
#[derive(Debug, Clone)]
pub struct Stepper {
    update: BaseUpdate,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    steps: u32,
}

impl Stepper {
    pub fn new(update: BaseUpdate, dim: usize) -> Self {
        Self {
            update,
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            steps: 0,
        }
    }

    /// Advances `x` along direction `d` with rate `eta`. `step_index` is
    /// only used to label a non-finite result.
    pub fn step(&mut self, x: &ParamVector, d: &ParamVector, eta: f64, step_index: usize) -> Result<ParamVector> {
        if !(eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be >= 0, got {eta}")));
        }
        d.check_dim(x.dim())?;
        let next = match self.update {
            BaseUpdate::Sgd => sgd_step(x, d, eta),
            BaseUpdate::Adam {
                beta1,
                beta2,
                weight_decay,
                eps,
            } => {
                self.steps += 1;
                let bias1 = 1.0 - beta1.powi(self.steps as i32);
                let bias2 = 1.0 - beta2.powi(self.steps as i32);
                let mut out = x.clone();
                for k in 0..x.dim() {
                    let g = -d[k];
                    self.first_moment[k] = beta1 * self.first_moment[k] + (1.0 - beta1) * g;
                    self.second_moment[k] = beta2 * self.second_moment[k] + (1.0 - beta2) * g * g;
                    let m_hat = self.first_moment[k] / bias1;
                    let v_hat = self.second_moment[k] / bias2;
                    out[k] = x[k] - eta * (m_hat / (v_hat.sqrt() + eps) + weight_decay * x[k]);
                }
                out
            }
        };
        if !next.is_finite() {
            return Err(Error::NonFiniteUpdate { step: step_index });
        }
        Ok(next)
    }
}
