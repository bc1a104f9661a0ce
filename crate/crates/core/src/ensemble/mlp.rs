//! Tiny tanh MLP over a synthetic Gaussian-blob classification set.
//!
//! Parameters are flattened layer by layer as `W_l` (row-major, `out × in`)
//! followed by `b_l`. Hidden layers use `tanh`; the output layer is linear.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EnsembleKind, LossEnsemble};
use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::vector::ParamVector;

const MAX_PARAMS: usize = 10_000;
const MAX_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpLoss {
    /// `½‖o − onehot(y)‖²`
    Squared,
    /// `logsumexp(o) − o_y`
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSpec {
    pub n: usize,
    /// `[inputs, hidden..., outputs]`; the output width is the class count.
    pub layer_sizes: Vec<usize>,
    pub loss: MlpLoss,
    pub data_seed: u64,
    /// Distance scale of the class centers.
    pub class_separation: f64,
    pub init_seed: u64,
    pub init_scale: f64,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            n: 256,
            layer_sizes: vec![2, 8, 3],
            loss: MlpLoss::CrossEntropy,
            data_seed: 0,
            class_separation: 2.0,
            init_seed: 0,
            init_scale: 1.0,
        }
    }
}

impl MlpSpec {
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::Config(format!(
                "invalid layer sizes {:?}: need at least input and output, all positive",
                self.layer_sizes
            )));
        }
        if self.param_count() > MAX_PARAMS {
            return Err(Error::Config(format!(
                "{} parameters exceeds the limit of {MAX_PARAMS}",
                self.param_count()
            )));
        }
        if self.n == 0 || self.n > MAX_SAMPLES {
            return Err(Error::Config(format!("sample count must be in [1, {MAX_SAMPLES}]")));
        }
        if self.loss == MlpLoss::CrossEntropy && *self.layer_sizes.last().unwrap() < 2 {
            return Err(Error::Config("cross-entropy needs at least two outputs".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<MlpEnsemble> {
        self.generate(0)
    }

    /// Fresh samples from the same class-conditional distribution.
    pub fn build_holdout(&self) -> Result<MlpEnsemble> {
        self.generate(1)
    }

    fn generate(&self, stream_index: u64) -> Result<MlpEnsemble> {
        self.validate()?;
        let inputs = self.layer_sizes[0];
        let classes = *self.layer_sizes.last().unwrap();
        let mut center_rng = substream(self.data_seed, Purpose::Data, u64::MAX);
        let centers: Vec<Vec<f64>> = (0..classes)
            .map(|_| {
                (0..inputs)
                    .map(|_| self.class_separation * center_rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let mut rng = substream(self.data_seed, Purpose::Data, stream_index);
        let mut features = Vec::with_capacity(self.n * inputs);
        let mut labels = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let label = rng.random_range(0..classes);
            for c in &centers[label] {
                features.push(c + rng.sample::<f64, _>(StandardNormal));
            }
            labels.push(label);
        }
        Ok(MlpEnsemble {
            spec: self.clone(),
            features,
            labels,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MlpEnsemble {
    spec: MlpSpec,
    features: Vec<f64>,
    labels: Vec<usize>,
}

struct LayerView {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

impl MlpEnsemble {
    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn features(&self, i: usize) -> &[f64] {
        let k = self.spec.layer_sizes[0];
        &self.features[i * k..(i + 1) * k]
    }

    fn layers(&self) -> Vec<LayerView> {
        let mut offset = 0;
        self.spec
            .layer_sizes
            .windows(2)
            .map(|w| {
                let view = LayerView {
                    fan_in: w[0],
                    fan_out: w[1],
                    weights: offset,
                    bias: offset + w[0] * w[1],
                };
                offset += w[0] * w[1] + w[1];
                view
            })
            .collect()
    }

    /// Scaled normal initialization, `N(0, init_scale² / fan_in)`, zero biases.
    pub fn initial_point(&self) -> ParamVector {
        let mut rng = crate::rng::stream(self.spec.init_seed, Purpose::Init);
        let mut x = vec![0.0; self.spec.param_count()];
        for layer in self.layers() {
            let std = self.spec.init_scale / (layer.fan_in as f64).sqrt();
            for w in &mut x[layer.weights..layer.bias] {
                *w = std * rng.sample::<f64, _>(StandardNormal);
            }
        }
        ParamVector::new(x)
    }

    /// Activations per layer (input first, raw output last).
    fn forward(&self, index: usize, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.layers();
        let mut acts = vec![self.features(index).to_vec()];
        for (l, layer) in layers.iter().enumerate() {
            let input = acts.last().unwrap();
            let last = l + 1 == layers.len();
            let out: Vec<f64> = (0..layer.fan_out)
                .map(|o| {
                    let row = &x[layer.weights + o * layer.fan_in..layer.weights + (o + 1) * layer.fan_in];
                    let z = x[layer.bias + o] + crate::vector::dot(row, input);
                    if last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    fn loss_and_output_grad(&self, index: usize, output: &[f64]) -> (f64, Vec<f64>) {
        let label = self.labels[index];
        match self.spec.loss {
            MlpLoss::Squared => {
                let residual: Vec<f64> = output
                    .iter()
                    .enumerate()
                    .map(|(k, o)| o - if k == label { 1.0 } else { 0.0 })
                    .collect();
                (0.5 * crate::vector::dot(&residual, &residual), residual)
            }
            MlpLoss::CrossEntropy => {
                let max = output.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = output.iter().map(|o| (o - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                let loss = max + total.ln() - output[label];
                let grad = exps
                    .iter()
                    .enumerate()
                    .map(|(k, e)| e / total - if k == label { 1.0 } else { 0.0 })
                    .collect();
                (loss, grad)
            }
        }
    }
}

impl LossEnsemble for MlpEnsemble {
    fn sample_count(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn kind(&self) -> EnsembleKind {
        EnsembleKind::TinyMlp
    }

    fn value(&self, index: usize, x: &[f64]) -> f64 {
        let acts = self.forward(index, x);
        self.loss_and_output_grad(index, acts.last().unwrap()).0
    }

    fn accumulate_grad(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let layers = self.layers();
        let acts = self.forward(index, x);
        let (_, mut delta) = self.loss_and_output_grad(index, acts.last().unwrap());
        for (l, layer) in layers.iter().enumerate().rev() {
            let input = &acts[l];
            for o in 0..layer.fan_out {
                let g = scale * delta[o];
                out[layer.bias + o] += g;
                let row = layer.weights + o * layer.fan_in;
                for (k, a) in input.iter().enumerate() {
                    out[row + k] += g * a;
                }
            }
            if l == 0 {
                break;
            }
            // Backpropagate through W_l, then through tanh of the layer below.
            let mut next = vec![0.0; layer.fan_in];
            for (o, d) in delta.iter().enumerate() {
                let row = layer.weights + o * layer.fan_in;
                for (k, nk) in next.iter_mut().enumerate() {
                    *nk += x[row + k] * d;
                }
            }
            for (nk, a) in next.iter_mut().zip(input) {
                *nk *= 1.0 - a * a;
            }
            delta = next;
        }
    }
}
