use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{EnsembleKind, LossEnsemble};
use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::vector::{dot, ParamVector};

/// Generator for a quadratic ensemble `f_i(x) = ½(x−a_i)ᵀA(x−a_i)`.
///
/// The curvature `A = Q diag(spectrum) Qᵀ` uses a random orthogonal `Q` (or
/// the identity when `rotate` is off); anchors are `spread · N(0, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticSpec {
    pub n: usize,
    pub d: usize,
    pub anchor_seed: u64,
    /// Eigenvalues of the shared curvature; defaults to all ones.
    pub spectrum: Option<Vec<f64>>,
    pub rotate: bool,
    pub anchor_spread: f64,
    /// Distance of the initial point from the anchor mean.
    pub init_distance: f64,
    pub init_seed: u64,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            n: 64,
            d: 4,
            anchor_seed: 0,
            spectrum: None,
            rotate: true,
            anchor_spread: 1.0,
            init_distance: 1.0,
            init_seed: 0,
        }
    }
}

impl QuadraticSpec {
    pub fn build(&self) -> Result<QuadraticEnsemble> {
        self.build_with_anchor_stream(0)
    }

    /// Fresh anchors from the same distribution, same curvature.
    pub fn build_holdout(&self) -> Result<QuadraticEnsemble> {
        self.build_with_anchor_stream(1)
    }

    fn build_with_anchor_stream(&self, stream_index: u64) -> Result<QuadraticEnsemble> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::Config("quadratic ensemble needs n >= 1 and d >= 1".into()));
        }
        let spectrum = match &self.spectrum {
            Some(s) if s.len() != self.d => {
                return Err(Error::Config(format!(
                    "curvature spectrum has {} entries but d = {}",
                    s.len(),
                    self.d
                )))
            }
            Some(s) => s.clone(),
            None => vec![1.0; self.d],
        };
        if spectrum.iter().any(|&l| !l.is_finite() || l < 0.0) {
            return Err(Error::Config("curvature spectrum must be finite and non-negative".into()));
        }
        let basis = if self.rotate {
            random_orthogonal(self.d, self.anchor_seed)
        } else {
            DMatrix::identity(self.d, self.d)
        };
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(spectrum));
        let mut curvature = &basis * diag * basis.transpose();
        // Symmetrize away rounding from the product.
        curvature = (&curvature + curvature.transpose()) * 0.5;

        let mut rng = substream(self.anchor_seed, Purpose::Anchors, stream_index);
        let anchors: Vec<Vec<f64>> = (0..self.n)
            .map(|_| {
                (0..self.d)
                    .map(|_| self.anchor_spread * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..self.d)
            .map(|r| (0..self.d).map(|c| curvature[(r, c)]).collect())
            .collect();
        let mut ens = QuadraticEnsemble::new(rows, anchors)?;
        ens.init = Some((self.init_seed, self.init_distance));
        Ok(ens)
    }
}

fn random_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = substream(seed, Purpose::Anchors, u64::MAX);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix column signs so the factorization is unique.
    let mut q = q;
    for c in 0..d {
        if r[(c, c)] < 0.0 {
            for row in 0..d {
                q[(row, c)] = -q[(row, c)];
            }
        }
    }
    q
}

/// Quadratic ensemble with a shared curvature matrix, so `L_i = λ_max(A)`
/// for every sample and `σ²` is exact.
#[derive(Debug, Clone)]
pub struct QuadraticEnsemble {
    d: usize,
    /// Row-major `d × d`.
    curvature: Vec<f64>,
    /// Row-major `n × d`.
    anchors: Vec<f64>,
    anchor_mean: Vec<f64>,
    lambda_max: f64,
    eigenvalues: Vec<f64>,
    sigma_sq: f64,
    init: Option<(u64, f64)>,
}

impl QuadraticEnsemble {
    /// Builds from an explicit symmetric PSD curvature (rows) and anchors.
    pub fn new(curvature: Vec<Vec<f64>>, anchors: Vec<Vec<f64>>) -> Result<Self> {
        let d = curvature.len();
        if d == 0 || anchors.is_empty() {
            return Err(Error::InvalidParameter("quadratic ensemble needs n >= 1 and d >= 1".into()));
        }
        if curvature.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidParameter("curvature must be square".into()));
        }
        if let Some(a) = anchors.iter().find(|a| a.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: a.len(),
            });
        }
        let flat: Vec<f64> = curvature.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) || anchors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("curvature and anchors must be finite".into()));
        }
        let scale = flat.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for r in 0..d {
            for c in 0..r {
                if (flat[r * d + c] - flat[c * d + r]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter(format!(
                        "curvature not symmetric at ({r}, {c})"
                    )));
                }
            }
        }
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, &flat));
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        if eigenvalues.iter().any(|&l| l < -1e-12 * scale) {
            return Err(Error::InvalidParameter("curvature must be positive semidefinite".into()));
        }
        let lambda_max = eigenvalues[0].max(0.0);

        let n = anchors.len();
        let anchors: Vec<f64> = anchors.into_iter().flatten().collect();
        let mut anchor_mean = vec![0.0; d];
        sum_rows(&anchors, d, 0..n, &mut anchor_mean);
        anchor_mean.iter_mut().for_each(|v| *v /= n as f64);

        let mut ens = Self {
            d,
            curvature: flat,
            anchors,
            anchor_mean,
            lambda_max,
            eigenvalues,
            sigma_sq: 0.0,
            init: None,
        };
        ens.sigma_sq = ens.compute_sigma_sq();
        Ok(ens)
    }

    fn compute_sigma_sq(&self) -> f64 {
        let n = self.sample_count();
        let mut diff = vec![0.0; self.d];
        let mut out = vec![0.0; self.d];
        let mut total = 0.0;
        for i in 0..n {
            for (k, v) in diff.iter_mut().enumerate() {
                *v = self.anchor(i)[k] - self.anchor_mean[k];
            }
            self.apply_curvature(&diff, &mut out);
            total += dot(&out, &out);
        }
        total / n as f64
    }

    pub fn anchor(&self, i: usize) -> &[f64] {
        &self.anchors[i * self.d..(i + 1) * self.d]
    }

    pub fn anchor_mean(&self) -> ParamVector {
        ParamVector::new(self.anchor_mean.clone())
    }

    /// Largest eigenvalue of the shared curvature.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn sigma_sq_exact(&self) -> f64 {
        self.sigma_sq
    }

    /// `Σ_i L_i = n · λ_max`.
    pub fn sum_lipschitz(&self) -> f64 {
        self.sample_count() as f64 * self.lambda_max
    }

    /// `out = A v`.
    pub fn apply_curvature(&self, v: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(&self.curvature[r * self.d..(r + 1) * self.d], v);
        }
    }

    pub fn curvature_row(&self, r: usize) -> &[f64] {
        &self.curvature[r * self.d..(r + 1) * self.d]
    }

    pub fn initial_point(&self) -> ParamVector {
        let (seed, distance) = self.init.unwrap_or((0, 1.0));
        let mut rng = crate::rng::stream(seed, Purpose::Init);
        let dir: Vec<f64> = (0..self.d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = crate::vector::norm(&dir).max(f64::MIN_POSITIVE);
        ParamVector::new(
            self.anchor_mean
                .iter()
                .zip(&dir)
                .map(|(m, u)| m + distance * u / len)
                .collect(),
        )
    }

    fn grad_from_center(&self, x: &[f64], center: &[f64], scale: f64, out: &mut [f64]) {
        let diff: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
        for (r, o) in out.iter_mut().enumerate() {
            *o += scale * dot(self.curvature_row(r), &diff);
        }
    }
}

fn sum_rows(rows: &[f64], d: usize, indices: impl Iterator<Item = usize>, out: &mut [f64]) {
    for i in indices {
        for (o, v) in out.iter_mut().zip(&rows[i * d..(i + 1) * d]) {
            *o += v;
        }
    }
}

impl LossEnsemble for QuadraticEnsemble {
    fn sample_count(&self) -> usize {
        self.anchors.len() / self.d
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn kind(&self) -> EnsembleKind {
        EnsembleKind::Quadratic
    }

    fn value(&self, index: usize, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(self.anchor(index)).map(|(a, b)| a - b).collect();
        let mut ad = vec![0.0; self.d];
        self.apply_curvature(&diff, &mut ad);
        0.5 * dot(&diff, &ad)
    }

    fn accumulate_grad(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        self.grad_from_center(x, self.anchor(index), scale, out);
    }

    /// `A(x − mean of batch anchors)`: one mat-vec regardless of batch size.
    fn mean_grad(&self, indices: &[usize], x: &[f64], out: &mut [f64]) {
        let mut center = vec![0.0; self.d];
        sum_rows(&self.anchors, self.d, indices.iter().copied(), &mut center);
        center.iter_mut().for_each(|v| *v /= indices.len() as f64);
        self.grad_from_center(x, &center, 1.0, out);
    }

    fn full_grad(&self, x: &[f64], out: &mut [f64]) {
        self.grad_from_center(x, &self.anchor_mean, 1.0, out);
    }

    fn lipschitz_constants(&self) -> Option<Vec<f64>> {
        Some(vec![self.lambda_max; self.sample_count()])
    }

    fn sigma_sq(&self) -> Option<f64> {
        Some(self.sigma_sq)
    }
}
