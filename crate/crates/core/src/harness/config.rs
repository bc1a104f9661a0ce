use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::SharpnessSpec;
use crate::ensemble::{Ensemble, EnsembleSpec, LossEnsemble};
use crate::error::{Error, Result};
use crate::sam::SamConfig;
use crate::schedules::{BatchSchedule, BatchStage, LrKind, LrSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub stages: Vec<BatchStage>,
}

/// `hi` is the rate of a constant schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrConfig {
    pub kind: LrKind,
    pub lo: f64,
    pub hi: f64,
    pub warmup_epochs: usize,
    pub init_lr: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            kind: LrKind::Constant,
            lo: 0.0,
            hi: 0.1,
            warmup_epochs: 0,
            init_lr: 0.0,
        }
    }
}

impl LrConfig {
    pub fn build(&self, batch: &BatchSchedule) -> Result<LrSchedule> {
        let k = batch.n().div_ceil(batch.stages()[0].batch_size);
        let inner = match self.kind {
            LrKind::Constant => LrSchedule::constant(self.hi)?,
            LrKind::Cosine => LrSchedule::cosine(self.lo, self.hi, k, batch.total_epochs())?,
            LrKind::Linear => LrSchedule::linear(self.lo, self.hi, batch.total_steps())?,
        };
        if self.warmup_epochs == 0 {
            return Ok(inner);
        }
        LrSchedule::warmup(self.init_lr, self.warmup_epochs, k, inner)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Steps between diagnostic rows; `⌈T/200⌉` when unset. The final step
    /// is always recorded.
    pub cadence: Option<usize>,
    /// Monte-Carlo batches per diagnostic row for `noise_mean`/`noise_se`;
    /// `0` disables them.
    pub noise_trials: usize,
    /// Final adaptive sharpness; skipped when unset.
    pub sharpness: Option<SharpnessSpec>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            cadence: None,
            noise_trials: 0,
            sharpness: Some(SharpnessSpec::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub sam: SamConfig,
    pub batch: BatchConfig,
    #[serde(default)]
    pub lr: LrConfig,
    /// Total epochs; must match the batch stages when given.
    #[serde(default)]
    pub epochs: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    /// Target for the convergence verdict in summaries.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// A validated config with its built components.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub ensemble: Ensemble,
    pub batch: BatchSchedule,
    pub lr: LrSchedule,
    pub total_steps: usize,
    pub cadence: usize,
}

impl Prepared {
    pub fn is_diagnostic_step(&self, step: usize) -> bool {
        step % self.cadence == 0 || step + 1 == self.total_steps
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn batch_schedule(&self) -> Result<BatchSchedule> {
        let schedule = BatchSchedule::new(self.ensemble.sample_count(), self.batch.stages.iter().copied())?;
        if let Some(e) = self.epochs {
            if e != schedule.total_epochs() {
                return Err(Error::Config(format!(
                    "epochs = {e} but the batch stages cover {} epochs",
                    schedule.total_epochs()
                )));
            }
        }
        Ok(schedule)
    }

    /// Validates every part of the config and builds the components.
    pub fn prepare(&self) -> Result<Prepared> {
        let ensemble = self.ensemble.build()?;
        self.sam.validate(ensemble.dim())?;
        let batch = self.batch_schedule()?;
        let lr = self.lr.build(&batch)?;
        let total_steps = batch.total_steps();
        let cadence = match self.diagnostics.cadence {
            Some(0) => return Err(Error::Config("diagnostics.cadence must be >= 1".into())),
            Some(c) => c,
            None => total_steps.div_ceil(200).max(1),
        };
        if let Some(spec) = &self.diagnostics.sharpness {
            spec.validate(ensemble.dim())?;
        }
        let trials = self.diagnostics.noise_trials;
        if trials != 0 && trials < crate::diagnostics::MIN_TRIALS {
            return Err(Error::Config(format!(
                "diagnostics.noise_trials must be 0 or >= {}",
                crate::diagnostics::MIN_TRIALS
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(Error::Config("epsilon must be > 0".into()));
            }
        }
        Ok(Prepared {
            ensemble,
            batch,
            lr,
            total_steps,
            cadence,
        })
    }

    /// SHA-256 of the config without its seeds and output directory, so the
    /// runs of one experiment share a hash.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("seeds");
            obj.remove("output_dir");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: &str = r#"{
        "ensemble": {"kind": "quadratic", "n": 64, "d": 4},
        "sam": {"rho": 0.01, "alpha": 0.02},
        "batch": {"stages": [[8, 2], [16, 2]]},
        "lr": {"kind": "cosine", "lo": 0.0, "hi": 0.1},
        "epochs": 4,
        "seeds": [1, 2]
    }"#;

    #[test]
    fn parses_and_prepares() {
        let cfg = RunConfig::from_json(QUAD).unwrap();
        let p = cfg.prepare().unwrap();
        assert_eq!(p.total_steps, 8 * 2 + 4 * 2);
        assert_eq!(p.cadence, 1);
        assert!(matches!(p.lr, LrSchedule::Cosine { steps_per_epoch: 8, epochs: 4, .. }));
    }

    #[test]
    fn rejects_mismatched_epochs_and_unknown_keys() {
        let bad = QUAD.replace("\"epochs\": 4", "\"epochs\": 5");
        let e = RunConfig::from_json(&bad).unwrap().prepare().unwrap_err();
        assert!(e.is_config_error());
        let bad = QUAD.replace("\"epochs\": 4", "\"epoch\": 4");
        assert!(RunConfig::from_json(&bad).unwrap_err().is_config_error());
        let bad = QUAD.replace("[[8, 2], [16, 2]]", "[[16, 2], [8, 2]]");
        assert!(RunConfig::from_json(&bad).unwrap().prepare().unwrap_err().is_config_error());
    }

    #[test]
    fn hash_ignores_seeds_only() {
        let a = RunConfig::from_json(QUAD).unwrap();
        let mut b = a.clone();
        b.seeds = vec![9];
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.sam.rho = 0.02;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn warmup_wraps_the_inner_schedule() {
        let text = QUAD.replace(
            r#""lr": {"kind": "cosine", "lo": 0.0, "hi": 0.1}"#,
            r#""lr": {"kind": "constant", "hi": 0.1, "warmup_epochs": 2, "init_lr": 0.01}"#,
        );
        let p = RunConfig::from_json(&text).unwrap().prepare().unwrap();
        assert_eq!(p.lr.lr_at_position(0, 0).unwrap(), 0.01);
        assert_eq!(p.lr.lr_at_position(20, 3).unwrap(), 0.1);
    }
}
