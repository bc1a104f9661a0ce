//! Per-sample loss ensembles `f_1, ..., f_n` with gradient oracles.

mod batch;
mod mlp;
mod quadratic;

pub use batch::{Batch, BatchSampler, MiniBatch, SamplingMode};
pub use mlp::{MlpEnsemble, MlpLoss, MlpSpec};
pub use quadratic::{QuadraticEnsemble, QuadraticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Quadratic,
    TinyMlp,
}

/// A finite sum `f_S(x) = (1/n) Σ_i f_i(x)` with per-sample oracles.
///
/// Implementations are immutable after construction; every oracle is a pure
/// function of `(x, index)`.
pub trait LossEnsemble: Send + Sync {
    fn sample_count(&self) -> usize;

    fn dim(&self) -> usize;

    fn kind(&self) -> EnsembleKind;

    fn value(&self, index: usize, x: &[f64]) -> f64;

    /// Adds `scale * ∇f_index(x)` to `out`.
    fn accumulate_grad(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]);

    /// Writes `(1/|indices|) Σ ∇f_i(x)` into `out` (which starts zeroed).
    fn mean_grad(&self, indices: &[usize], x: &[f64], out: &mut [f64]) {
        let scale = 1.0 / indices.len() as f64;
        for &i in indices {
            self.accumulate_grad(i, x, scale, out);
        }
    }

    /// Writes `∇f_S(x)` into `out` (which starts zeroed). Must agree bit for
    /// bit with `mean_grad` over `0..n` in order.
    fn full_grad(&self, x: &[f64], out: &mut [f64]) {
        let scale = 1.0 / self.sample_count() as f64;
        for i in 0..self.sample_count() {
            self.accumulate_grad(i, x, scale, out);
        }
    }

    /// Per-sample smoothness constants `L_i`, when known exactly.
    fn lipschitz_constants(&self) -> Option<Vec<f64>> {
        None
    }

    /// Exact variance bound `σ²`, when known.
    fn sigma_sq(&self) -> Option<f64> {
        None
    }
}

fn check_indices(ens: &(impl LossEnsemble + ?Sized), indices: &[usize]) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = ens.sample_count();
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, n });
    }
    Ok(())
}

fn first_nonfinite_sample(
    ens: &(impl LossEnsemble + ?Sized),
    x: &[f64],
    indices: impl Iterator<Item = usize>,
) -> usize {
    let mut buf = vec![0.0; ens.dim()];
    for i in indices {
        buf.iter_mut().for_each(|v| *v = 0.0);
        ens.accumulate_grad(i, x, 1.0, &mut buf);
        if buf.iter().any(|v| !v.is_finite()) {
            return i;
        }
    }
    // The sum overflowed even though every term is finite.
    usize::MAX
}

/// `∇f_i(x)` for a single sample.
pub fn sample_gradient(
    ens: &(impl LossEnsemble + ?Sized),
    index: usize,
    x: &ParamVector,
) -> Result<ParamVector> {
    x.check_dim(ens.dim())?;
    check_indices(ens, &[index])?;
    let mut out = vec![0.0; ens.dim()];
    ens.accumulate_grad(index, x.as_slice(), 1.0, &mut out);
    let g = ParamVector::new(out);
    if !g.is_finite() {
        return Err(Error::NonFiniteGradient { index });
    }
    Ok(g)
}

/// `∇f_S(x) = (1/n) Σ_i ∇f_i(x)`.
pub fn full_gradient(ens: &(impl LossEnsemble + ?Sized), x: &ParamVector) -> Result<ParamVector> {
    x.check_dim(ens.dim())?;
    let mut out = vec![0.0; ens.dim()];
    ens.full_grad(x.as_slice(), &mut out);
    let g = ParamVector::new(out);
    if !g.is_finite() {
        let index = first_nonfinite_sample(ens, x.as_slice(), 0..ens.sample_count());
        return Err(Error::NonFiniteGradient { index });
    }
    Ok(g)
}

/// `∇f_{S_t}(x) = (1/b) Σ_{i ∈ batch} ∇f_i(x)`; duplicates count with multiplicity.
pub fn minibatch_gradient(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    batch: &MiniBatch,
) -> Result<ParamVector> {
    indices_gradient(ens, x, &batch.indices)
}

pub(crate) fn indices_gradient(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    indices: &[usize],
) -> Result<ParamVector> {
    x.check_dim(ens.dim())?;
    check_indices(ens, indices)?;
    let mut out = vec![0.0; ens.dim()];
    ens.mean_grad(indices, x.as_slice(), &mut out);
    let g = ParamVector::new(out);
    if !g.is_finite() {
        let index = first_nonfinite_sample(ens, x.as_slice(), indices.iter().copied());
        return Err(Error::NonFiniteGradient { index });
    }
    Ok(g)
}

/// Gradient over either the full sample set or a mini-batch.
pub fn batch_gradient(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    batch: Batch<'_>,
) -> Result<ParamVector> {
    match batch {
        Batch::Full => full_gradient(ens, x),
        Batch::Indices(indices) => indices_gradient(ens, x, indices),
    }
}

/// `f_S(x)`.
pub fn full_loss(ens: &(impl LossEnsemble + ?Sized), x: &ParamVector) -> Result<f64> {
    x.check_dim(ens.dim())?;
    let n = ens.sample_count();
    Ok((0..n).map(|i| ens.value(i, x.as_slice())).sum::<f64>() / n as f64)
}

/// Mean loss over a batch selection.
pub fn batch_loss(
    ens: &(impl LossEnsemble + ?Sized),
    x: &ParamVector,
    batch: Batch<'_>,
) -> Result<f64> {
    match batch {
        Batch::Full => full_loss(ens, x),
        Batch::Indices(indices) => {
            x.check_dim(ens.dim())?;
            check_indices(ens, indices)?;
            Ok(indices.iter().map(|&i| ens.value(i, x.as_slice())).sum::<f64>()
                / indices.len() as f64)
        }
    }
}

/// Exact per-point gradient variance `(1/n) Σ_i ‖∇f_i(x) − ∇f_S(x)‖²`.
///
/// With i.i.d. uniform sampling the mini-batch gradient variance at `x` is
/// exactly this value divided by `b`.
pub fn pointwise_variance(ens: &(impl LossEnsemble + ?Sized), x: &ParamVector) -> Result<f64> {
    let full = full_gradient(ens, x)?;
    let n = ens.sample_count();
    let mut total = 0.0;
    let mut buf = vec![0.0; ens.dim()];
    for i in 0..n {
        buf.copy_from_slice(full.as_slice());
        ens.accumulate_grad(i, x.as_slice(), -1.0, &mut buf);
        total += crate::vector::dot(&buf, &buf);
    }
    Ok(total / n as f64)
}

/// `σ² = (1/n) Σ_i ‖A(a_i − ā)‖²`; exact at every `x` for the quadratic family.
pub fn exact_sigma_sq(ens: &QuadraticEnsemble) -> f64 {
    ens.sigma_sq_exact()
}

/// Configuration-level description of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleSpec {
    Quadratic(QuadraticSpec),
    TinyMlp(MlpSpec),
}

/// A built ensemble of either family.
#[derive(Debug, Clone)]
pub enum Ensemble {
    Quadratic(QuadraticEnsemble),
    TinyMlp(MlpEnsemble),
}

impl EnsembleSpec {
    pub fn build(&self) -> Result<Ensemble> {
        match self {
            EnsembleSpec::Quadratic(spec) => spec.build().map(Ensemble::Quadratic),
            EnsembleSpec::TinyMlp(spec) => spec.build().map(Ensemble::TinyMlp),
        }
    }

    /// A held-out ensemble drawn from the same generating distribution.
    pub fn build_holdout(&self) -> Result<Ensemble> {
        match self {
            EnsembleSpec::Quadratic(spec) => spec.build_holdout().map(Ensemble::Quadratic),
            EnsembleSpec::TinyMlp(spec) => spec.build_holdout().map(Ensemble::TinyMlp),
        }
    }

    pub fn sample_count(&self) -> usize {
        match self {
            EnsembleSpec::Quadratic(spec) => spec.n,
            EnsembleSpec::TinyMlp(spec) => spec.n,
        }
    }
}

impl Ensemble {
    pub fn as_dyn(&self) -> &dyn LossEnsemble {
        match self {
            Ensemble::Quadratic(q) => q,
            Ensemble::TinyMlp(m) => m,
        }
    }

    /// Initial point for a run; depends only on the ensemble spec, never on
    /// the run seed.
    pub fn initial_point(&self) -> ParamVector {
        match self {
            Ensemble::Quadratic(q) => q.initial_point(),
            Ensemble::TinyMlp(m) => m.initial_point(),
        }
    }
}

macro_rules! delegate {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            Ensemble::Quadratic($e) => $body,
            Ensemble::TinyMlp($e) => $body,
        }
    };
}

impl LossEnsemble for Ensemble {
    fn sample_count(&self) -> usize {
        delegate!(self, e => e.sample_count())
    }

    fn dim(&self) -> usize {
        delegate!(self, e => e.dim())
    }

    fn kind(&self) -> EnsembleKind {
        delegate!(self, e => e.kind())
    }

    fn value(&self, index: usize, x: &[f64]) -> f64 {
        delegate!(self, e => e.value(index, x))
    }

    fn accumulate_grad(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        delegate!(self, e => e.accumulate_grad(index, x, scale, out))
    }

    fn mean_grad(&self, indices: &[usize], x: &[f64], out: &mut [f64]) {
        delegate!(self, e => e.mean_grad(indices, x, out))
    }

    fn full_grad(&self, x: &[f64], out: &mut [f64]) {
        delegate!(self, e => e.full_grad(x, out))
    }

    fn lipschitz_constants(&self) -> Option<Vec<f64>> {
        delegate!(self, e => e.lipschitz_constants())
    }

    fn sigma_sq(&self) -> Option<f64> {
        delegate!(self, e => e.sigma_sq())
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> QuadraticEnsemble {
        QuadraticEnsemble::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn full_gradient_at_anchor_mean_is_zero() {
        let q = two_point();
        let g = full_gradient(&q, &ParamVector::new(vec![0.0, 0.0])).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn full_gradient_closed_form() {
        let q = two_point();
        let g = full_gradient(&q, &ParamVector::new(vec![2.0, 0.0])).unwrap();
        assert_eq!(g.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn single_sample_full_gradient_is_sample_gradient() {
        let q = QuadraticEnsemble::new(
            vec![vec![2.0, 0.5], vec![0.5, 1.0]],
            vec![vec![0.3, -0.7]],
        )
        .unwrap();
        let x = ParamVector::new(vec![1.5, 2.0]);
        assert_eq!(full_gradient(&q, &x).unwrap(), sample_gradient(&q, 0, &x).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let q = two_point();
        let err = full_gradient(&q, &ParamVector::zeros(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, actual: 3 }));
    }

    #[test]
    fn nonfinite_gradient_names_the_sample() {
        let q = QuadraticEnsemble::new(
            vec![vec![1.0]],
            vec![vec![0.0], vec![f64::INFINITY], vec![1.0]],
        );
        // Non-finite anchors are rejected up front.
        assert!(q.is_err());
        let q = QuadraticEnsemble::new(vec![vec![1.0]], vec![vec![0.0], vec![1.0]]).unwrap();
        let err = full_gradient(&q, &ParamVector::new(vec![f64::NAN])).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 0 }));
    }

    #[test]
    fn minibatch_full_set_matches_full_gradient() {
        let q = two_point();
        let x = ParamVector::new(vec![0.4, -1.2]);
        let batch = MiniBatch::new(vec![0, 1], SamplingMode::WithReplacement);
        assert_eq!(
            minibatch_gradient(&q, &x, &batch).unwrap(),
            full_gradient(&q, &x).unwrap()
        );
    }

    #[test]
    fn minibatch_single_sample_closed_form() {
        let q = two_point();
        let batch = MiniBatch::new(vec![0], SamplingMode::WithReplacement);
        let g = minibatch_gradient(&q, &ParamVector::zeros(2), &batch).unwrap();
        assert_eq!(g.as_slice(), &[-1.0, 0.0]);
    }

    #[test]
    fn duplicate_indices_average_out() {
        let spec = MlpSpec {
            n: 5,
            layer_sizes: vec![2, 3, 2],
            ..MlpSpec::default()
        };
        let m = spec.build().unwrap();
        let x = m.initial_point();
        let once = minibatch_gradient(&m, &x, &MiniBatch::new(vec![1], SamplingMode::WithReplacement)).unwrap();
        let twice = minibatch_gradient(&m, &x, &MiniBatch::new(vec![1, 1], SamplingMode::WithReplacement)).unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            assert!((a - b).abs() <= 1e-15 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn empty_and_invalid_batches_are_rejected() {
        let q = two_point();
        let x = ParamVector::zeros(2);
        let empty = MiniBatch::new(vec![], SamplingMode::WithReplacement);
        assert!(matches!(minibatch_gradient(&q, &x, &empty), Err(Error::EmptyBatch)));
        let bad = MiniBatch::new(vec![2], SamplingMode::WithReplacement);
        assert!(matches!(
            minibatch_gradient(&q, &x, &bad),
            Err(Error::IndexOutOfRange { index: 2, n: 2 })
        ));
    }

    #[test]
    fn sigma_sq_examples() {
        assert_eq!(exact_sigma_sq(&two_point()), 1.0);
        let same = QuadraticEnsemble::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.5, 0.5]; 4],
        )
        .unwrap();
        assert_eq!(exact_sigma_sq(&same), 0.0);
        let scaled = QuadraticEnsemble::new(
            vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(exact_sigma_sq(&scaled), 4.0);
    }

    #[test]
    fn pointwise_variance_matches_sigma_for_quadratics() {
        let q = QuadraticSpec {
            n: 37,
            d: 4,
            spectrum: Some(vec![0.5, 1.0, 2.0, 3.0]),
            ..QuadraticSpec::default()
        }
        .build()
        .unwrap();
        for scale in [0.0, 1.0, 10.0] {
            let x = ParamVector::new(vec![scale, -scale, 0.5, 2.0]);
            let v = pointwise_variance(&q, &x).unwrap();
            let s = exact_sigma_sq(&q);
            assert!((v - s).abs() <= 1e-10 * s.max(1.0), "{v} vs {s}");
        }
    }
}
