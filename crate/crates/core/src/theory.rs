//! Closed-form noise bounds, learning-rate and radius windows, the
//! scaling-law fit and convergence verdicts.

use serde::{Deserialize, Serialize};

use crate::ensemble::{batch_gradient, full_gradient, Batch, LossEnsemble, QuadraticEnsemble};
use crate::error::{Error, Result};
use crate::harness::RunTrace;
use crate::sam::perturbation;
use crate::schedules::{h_constants, LrKind, LrSchedule};
use crate::vector::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub n: usize,
    /// `Σ_i L_i`
    pub sum_l: f64,
    pub sigma: f64,
    pub rho: f64,
    pub alpha: f64,
    pub g: f64,
    pub g_perp: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    pub epsilon: f64,
}

impl ProblemConstants {
    /// Exact `n`, `ΣL` and `σ` of a quadratic ensemble; the remaining fields
    /// are zero.
    pub fn for_quadratic(ens: &QuadraticEnsemble) -> Self {
        Self {
            n: ens.sample_count(),
            sum_l: ens.sum_lipschitz(),
            sigma: ens.sigma_sq_exact().sqrt(),
            rho: 0.0,
            alpha: 0.0,
            g: 0.0,
            g_perp: 0.0,
            b: 0.0,
            c: 0.0,
            epsilon: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be >= 1".into()));
        }
        let named = [
            ("sum_l", self.sum_l),
            ("sigma", self.sigma),
            ("rho", self.rho),
            ("g", self.g),
            ("g_perp", self.g_perp),
            ("b", self.b),
            ("c", self.c),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in named {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !self.alpha.is_finite() {
            return Err(Error::InvalidParameter("alpha must be finite".into()));
        }
        Ok(())
    }

    fn check_batch(&self, b: usize) -> Result<()> {
        if b == 0 || b > self.n {
            return Err(Error::OutOfRange {
                what: "batch size",
                value: b,
                lo: 1,
                hi: self.n + 1,
            });
        }
        Ok(())
    }

    fn needs_window_inputs(&self) -> Result<()> {
        self.validate()?;
        if !(self.epsilon > 0.0 && self.g > 0.0 && self.sum_l > 0.0) {
            return Err(Error::InvalidParameter("windows need epsilon, G and sum_l all > 0".into()));
        }
        Ok(())
    }
}

/// Upper bound on `E η‖ω‖` at batch size `b`.
pub fn theorem1_upper_bound(c: &ProblemConstants, eta: f64, b: usize) -> Result<f64> {
    c.validate()?;
    c.check_batch(b)?;
    let perp = c.alpha.abs() * c.g_perp;
    if b == c.n {
        return Ok(eta * perp);
    }
    let (bf, nf) = (b as f64, c.n as f64);
    let sensitivity = 4.0 * c.rho * c.rho * (1.0 / (bf * bf) + 1.0 / (nf * nf)) * c.sum_l * c.sum_l;
    Ok(eta * ((sensitivity + 2.0 * c.sigma * c.sigma / bf).sqrt() + perp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Theorem2Case {
    /// `b = n`; carries an estimate of `E‖∇f_{S⊥}(x)‖`.
    Full { perp_mean: f64 },
    ANonneg,
    ANeg,
}

/// Lower bound on `E η‖ω‖`. Negative values are vacuous and returned as is.
pub fn theorem2_lower_bound(
    c: &ProblemConstants,
    eta: f64,
    b: usize,
    case: Theorem2Case,
    c_t: f64,
    d_t: f64,
) -> Result<f64> {
    c.validate()?;
    c.check_batch(b)?;
    for (name, v) in [("c_t", c_t), ("d_t", d_t)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1], got {v}")));
        }
    }
    let (bf, nf) = (b as f64, c.n as f64);
    let perp = c.alpha.abs() * c.g_perp;
    Ok(match case {
        Theorem2Case::Full { perp_mean } => eta * c.alpha.abs() * perp_mean,
        Theorem2Case::ANonneg => {
            eta * (c_t * c.sigma / bf.sqrt() - c.rho * (1.0 / bf + 1.0 / nf) * c.sum_l - perp)
        }
        Theorem2Case::ANeg => {
            eta * (c.rho * (d_t / bf - 1.0 / nf) * c.sum_l - c.sigma / bf.sqrt() - perp)
        }
    })
}

/// `A_t = ‖∇f_{S_t}(x) − ∇f_S(x)‖ − ‖A(ε̂_{S_t} − ε̂_S)‖`, exact for a
/// quadratic ensemble because its Hessian is constant.
pub fn quadratic_a_t(
    ens: &QuadraticEnsemble,
    x: &ParamVector,
    batch: Batch<'_>,
    rho: f64,
    threshold: f64,
) -> Result<f64> {
    let g_batch = batch_gradient(ens, x, batch)?;
    let g_full = full_gradient(ens, x)?;
    let shift = perturbation(&g_batch, rho, None, threshold)?.sub(&perturbation(&g_full, rho, None, threshold)?);
    let mut curved = vec![0.0; ens.dim()];
    ens.apply_curvature(shift.as_slice(), &mut curved);
    Ok(g_batch.sub(&g_full).norm() - ParamVector::new(curved).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub const MIN_SCALING_POINTS: usize = 5;

/// Least-squares fit of `log(mean)` against `log(b)`.
///
/// `r² = 1` when the means are all equal (nothing left to explain).
pub fn scaling_fit(measurements: &[(usize, f64)]) -> Result<ScalingFit> {
    let mut sizes: Vec<usize> = measurements.iter().map(|(b, _)| *b).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < MIN_SCALING_POINTS {
        return Err(Error::NoData(format!(
            "scaling fit needs at least {MIN_SCALING_POINTS} distinct batch sizes, got {}",
            sizes.len()
        )));
    }
    if let Some((b, m)) = measurements.iter().find(|(b, m)| *b == 0 || !(*m > 0.0) || !m.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scaling fit needs positive batch sizes and means, got ({b}, {m})"
        )));
    }
    let pts: Vec<(f64, f64)> = measurements
        .iter()
        .map(|(b, m)| ((*b as f64).ln(), m.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(ScalingFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Largest admissible `H1` and `H2` for a schedule starting at batch `b0`.
/// `h1_max` is infinite when `C = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HLimits {
    pub h1_max: f64,
    pub h2_max: f64,
}

pub fn h_limits(c: &ProblemConstants, b0: usize) -> Result<HLimits> {
    c.needs_window_inputs()?;
    c.check_batch(b0)?;
    let (nf, bf) = (c.n as f64, b0 as f64);
    let eps2 = c.epsilon * c.epsilon;
    let lower_core = c.rho * c.g / bf.sqrt() + 3.0 * c.sigma * c.sum_l / (nf * bf);
    let h1_max = if c.sigma * c.c * lower_core == 0.0 {
        f64::INFINITY
    } else {
        eps2 / (12.0 * c.sigma * c.c * lower_core)
    };
    let a1 = (c.alpha.abs() + 1.0).powi(2);
    let h2_max = nf.powi(3) * eps2
        / (6.0 * c.g * c.g * c.sum_l * (nf * nf + 4.0 * c.c * c.sum_l * c.sum_l))
        / a1;
    Ok(HLimits { h1_max, h2_max })
}

/// Whether a schedule's H constants fall inside the admissible limits.
pub fn schedule_admissible(c: &ProblemConstants, b0: usize, sched: &LrSchedule) -> Result<bool> {
    let limits = h_limits(c, b0)?;
    let (h1, h2, _) = h_constants(sched)?;
    Ok(h1 <= limits.h1_max && h2 <= limits.h2_max)
}

/// Interval of admissible constant rates `η`, or peak rates `η̄` (with
/// `η̲ = 0`) for the decaying schedules, at initial batch size `b0`.
///
/// The lower end is `0` whenever `C = 0`; the interval is then read as
/// half-open.
pub fn admissible_eta_window(c: &ProblemConstants, kind: LrKind, b0: usize) -> Result<(f64, f64)> {
    let limits = h_limits(c, b0)?;
    // H1 = 1/η (constant) or 2/η̄; H2 = η, 3η̄/4 or 2η̄/3.
    let (h1_scale, h2_scale) = match kind {
        LrKind::Constant => (1.0, 1.0),
        LrKind::Cosine => (2.0, 0.75),
        LrKind::Linear => (2.0, 2.0 / 3.0),
    };
    let lo = h1_scale / limits.h1_max;
    let hi = limits.h2_max / h2_scale;
    if lo > hi {
        return Err(Error::EmptyWindow(format!(
            "learning-rate window [{lo:e}, {hi:e}] is empty: the lower end grows with C = {} \
             and sigma = {}, the upper end shrinks with C, G = {} and sum_l = {}",
            c.c, c.sigma, c.g, c.sum_l
        )));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Increasing batch sizes with a constant rate.
    IncreasingBatch,
    /// Constant batch size with a decaying rate.
    DecayingLr,
}

/// Largest admissible `ρ` for the given starting batch size.
pub fn rho_window(c: &ProblemConstants, b0: usize, regime: Regime) -> Result<f64> {
    c.needs_window_inputs()?;
    c.check_batch(b0)?;
    let (nf, bf) = (c.n as f64, b0 as f64);
    let eps2 = c.epsilon * c.epsilon;
    let denom = match regime {
        Regime::IncreasingBatch => 2.0 * 42f64.sqrt(),
        Regime::DecayingLr => 12.0,
    };
    let geometric = nf * bf * eps2 / (denom * c.g * (nf * nf + bf * bf).sqrt() * c.sum_l);
    let coupled = c.c * c.g * bf.sqrt() + c.b * c.sigma;
    let first = if coupled == 0.0 {
        f64::INFINITY
    } else {
        nf * bf.sqrt() * eps2 / (6.0 * c.g * coupled * c.sum_l) / (c.alpha.abs() + 1.0)
    };
    Ok(geometric.min(first))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub achieved: bool,
    pub min_grad_norm: f64,
    pub argmin_step: usize,
}

/// Minimum of a recorded `(step, norm)` series compared against `epsilon`.
pub fn verdict_from_norms(norms: &[(usize, f64)], epsilon: f64) -> Result<Verdict> {
    let (step, min) = norms
        .iter()
        .copied()
        .fold(None, |best: Option<(usize, f64)>, (s, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((s, v)),
        })
        .ok_or_else(|| Error::NoData("no full SAM-gradient norms recorded".into()))?;
    Ok(Verdict {
        achieved: min <= epsilon,
        min_grad_norm: min,
        argmin_step: step,
    })
}

/// Verdict on the seed-averaged full SAM-gradient norm. Only steps recorded
/// in every trace take part.
pub fn convergence_verdict(traces: &[RunTrace], epsilon: f64) -> Result<Verdict> {
    let first = traces
        .first()
        .ok_or_else(|| Error::NoData("no traces supplied".into()))?;
    let mut averaged = Vec::new();
    for (i, rec) in first.records.iter().enumerate() {
        let mut sum = 0.0;
        let mut complete = true;
        for t in traces {
            match t.records.get(i).filter(|r| r.step == rec.step).and_then(|r| r.sam_grad_norm) {
                Some(v) => sum += v,
                None => {
                    complete = false;
                    break;
                }
            }
        }
        if complete {
            averaged.push((rec.step, sum / traces.len() as f64));
        }
    }
    verdict_from_norms(&averaged, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn base() -> ProblemConstants {
        ProblemConstants {
            n: 1024,
            sum_l: 1024.0,
            sigma: 0.5,
            rho: 0.0,
            alpha: 0.0,
            g: 1.0,
            g_perp: 0.3,
            b: 0.0,
            c: 0.0,
            epsilon: 0.01,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn theorem1_examples() {
        let c = ProblemConstants {
            n: 2,
            sum_l: 2.0,
            sigma: 1.0,
            rho: 0.1,
            ..base()
        };
        assert_eq!(theorem1_upper_bound(&c, 1.0, 2).unwrap(), 0.0);
        assert!((theorem1_upper_bound(&c, 1.0, 1).unwrap() - 2.2f64.sqrt()).abs() < 1e-15);
        assert!((theorem1_upper_bound(&c, 1.0, 1).unwrap() - 1.483240).abs() < 1e-6);
        assert!(theorem1_upper_bound(&c, 1.0, 3).is_err());
        let g = ProblemConstants { alpha: 0.5, ..c };
        assert!((theorem1_upper_bound(&g, 2.0, 2).unwrap() - 2.0 * 0.5 * 0.3).abs() < 1e-15);
    }

    #[test]
    fn theorem2_examples() {
        let c = base();
        let v = theorem2_lower_bound(&c, 0.1, 16, Theorem2Case::ANonneg, 1.0, 1.0).unwrap();
        assert!((v - 0.1 * 0.5 / 4.0).abs() < 1e-15);
        let f = theorem2_lower_bound(&ProblemConstants { alpha: 0.2, ..c }, 0.1, 1024, Theorem2Case::Full { perp_mean: 0.7 }, 1.0, 1.0)
            .unwrap();
        assert!((f - 0.1 * 0.2 * 0.7).abs() < 1e-15);
        assert!(theorem2_lower_bound(&c, 0.1, 4, Theorem2Case::ANeg, 0.0, 1.0).is_err());
    }

    #[test]
    fn quadratic_a_t_vanishes_at_the_full_batch() {
        let ens = crate::QuadraticSpec { n: 8, d: 3, ..Default::default() }.build().unwrap();
        let x = ens.initial_point();
        assert_eq!(quadratic_a_t(&ens, &x, Batch::Full, 0.1, 1e-12).unwrap(), 0.0);
        let a = quadratic_a_t(&ens, &x, Batch::Indices(&[1, 2]), 0.0, 1e-12).unwrap();
        assert!(a > 0.0);
    }

    #[test]
    fn scaling_fit_examples() {
        let exact: Vec<(usize, f64)> = [1, 2, 4, 8, 16, 32].iter().map(|&b| (b, 1.0 / (b as f64).sqrt())).collect();
        let f = scaling_fit(&exact).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let flat: Vec<(usize, f64)> = [1, 2, 4, 8, 16].iter().map(|&b| (b, 0.3)).collect();
        let f = scaling_fit(&flat).unwrap();
        assert_eq!(f.slope, 0.0);
        assert_eq!(f.r_squared, 1.0);
        assert!(scaling_fit(&exact[..4]).is_err());
        let mut bad = exact.clone();
        bad[2].1 = 0.0;
        assert!(scaling_fit(&bad).is_err());
    }

    #[test]
    fn eta_window_examples() {
        let c = ProblemConstants { g: 1.0, ..base() };
        let (lo, hi) = admissible_eta_window(&c, LrKind::Constant, 8).unwrap();
        assert_eq!(lo, 0.0);
        assert!(rel(hi, 1024.0 * 1e-4 / (6.0 * 1024.0)) < 1e-12);
        assert!((hi - 1.6667e-5).abs() < 1e-9);

        let g = ProblemConstants { alpha: 0.02, ..c };
        let (_, hi_alpha) = admissible_eta_window(&g, LrKind::Constant, 8).unwrap();
        assert!(rel(hi / hi_alpha, 1.02f64.powi(2)) < 1e-12);

        let (_, cos) = admissible_eta_window(&c, LrKind::Cosine, 8).unwrap();
        let (_, lin) = admissible_eta_window(&c, LrKind::Linear, 8).unwrap();
        assert!(rel(cos, hi * 4.0 / 3.0) < 1e-12);
        assert!(rel(lin, hi * 6.0 / 4.0) < 1e-12);
    }

    #[test]
    fn full_window_and_empty_window() {
        let c = ProblemConstants { c: 1e-6, rho: 1e-8, sigma: 1e-3, ..base() };
        let (lo, hi) = admissible_eta_window(&c, LrKind::Constant, 8).unwrap();
        let expected_lo = 12.0 * 1e-3 * 1e-6 / 1e-4 * (1e-8 / 8f64.sqrt() + 3.0 * 1e-3 * 1024.0 / (1024.0 * 8.0));
        let expected_hi = 1024f64.powi(3) * 1e-4 / (6.0 * 1024.0 * (1024.0 * 1024.0 + 4.0 * 1e-6 * 1024.0 * 1024.0));
        assert!(rel(lo, expected_lo) < 1e-12);
        assert!(rel(hi, expected_hi) < 1e-12);
        let (lo_cos, _) = admissible_eta_window(&c, LrKind::Cosine, 8).unwrap();
        assert!(rel(lo_cos, 2.0 * expected_lo) < 1e-12);

        let bad = ProblemConstants { c: 10.0, sigma: 1.0, ..base() };
        assert!(matches!(admissible_eta_window(&bad, LrKind::Constant, 8), Err(Error::EmptyWindow(_))));
    }

    #[test]
    fn constant_h_values_reproduce_the_constant_window() {
        for cc in [0.0, 1e-7, 1e-5] {
            let c = ProblemConstants { c: cc, rho: 1e-6, alpha: 0.03, sigma: 1e-3, ..base() };
            let limits = h_limits(&c, 8).unwrap();
            let (lo, hi) = admissible_eta_window(&c, LrKind::Constant, 8).unwrap();
            // H1 = 1/η ≤ h1_max and H2 = η ≤ h2_max
            assert!(rel(hi, limits.h2_max) < 1e-12);
            if cc > 0.0 {
                assert!(rel(lo, 1.0 / limits.h1_max) < 1e-12);
            }
            let s = LrSchedule::constant(hi).unwrap();
            assert!(schedule_admissible(&c, 8, &s).unwrap());
            let s = LrSchedule::constant(hi * (1.0 + 1e-9)).unwrap();
            assert!(!schedule_admissible(&c, 8, &s).unwrap());
        }
    }

    #[test]
    fn rho_window_examples() {
        let c = base();
        let r = rho_window(&c, 8, Regime::IncreasingBatch).unwrap();
        let expected = 1024.0 * 8.0 * 1e-4 / (2.0 * 42f64.sqrt() * (1024f64 * 1024.0 + 64.0).sqrt() * 1024.0);
        assert!(rel(r, expected) < 1e-12);
        assert!((r - 6.03e-8).abs() < 0.01e-8);

        let sym = rho_window(&c, 1024, Regime::IncreasingBatch).unwrap();
        let expected = 1024.0 * 1024.0 * 1e-4 / (2.0 * 42f64.sqrt() * 1024.0 * 2f64.sqrt() * 1024.0);
        assert!(rel(sym, expected) < 1e-12);

        let doubled = rho_window(&ProblemConstants { epsilon: 0.02, ..c }, 8, Regime::IncreasingBatch).unwrap();
        assert!(rel(doubled, 4.0 * r) < 1e-12);

        let d = rho_window(&c, 32, Regime::DecayingLr).unwrap();
        let expected = 1024.0 * 32.0 * 1e-4 / (12.0 * (1024f64 * 1024.0 + 1024.0).sqrt() * 1024.0);
        assert!(rel(d, expected) < 1e-12);

        let coupled = ProblemConstants { c: 1e-3, b: 2.0, alpha: 0.1, ..c };
        let first = 1024.0 * 8f64.sqrt() * 1e-4 / (6.0 * (1e-3 * 8f64.sqrt() + 2.0 * 0.5) * 1024.0) / 1.1;
        let r = rho_window(&coupled, 8, Regime::IncreasingBatch).unwrap();
        assert!(rel(r, first.min(6.03e-8)) < 0.01);
    }

    #[test]
    fn verdict_examples() {
        let norms = [(0, 0.5), (1, 0.2), (2, 0.05)];
        let v = verdict_from_norms(&norms, 0.1).unwrap();
        assert!(v.achieved);
        assert_eq!((v.min_grad_norm, v.argmin_step), (0.05, 2));
        assert!(!verdict_from_norms(&norms, 0.01).unwrap().achieved);
        assert!(verdict_from_norms(&[], 0.1).is_err());
    }

    proptest! {
        #[test]
        fn theorem1_bound_is_non_increasing_in_b(
            n in 2usize..200, rho in 0.0..1.0f64, sigma in 0.0..3.0f64,
            sum_l in 0.0..500.0f64, alpha in -0.5..0.5f64,
        ) {
            let c = ProblemConstants { n, rho, sigma, sum_l, alpha, ..base() };
            let mut prev = f64::INFINITY;
            for b in 1..=n {
                let v = theorem1_upper_bound(&c, 0.1, b).unwrap();
                prop_assert!(v <= prev * (1.0 + 1e-12));
                prev = v;
            }
        }

        #[test]
        fn lower_bound_sits_below_upper_bound(
            n in 2usize..500, b in 1usize..500, rho in 0.0..1.0f64, sigma in 0.0..3.0f64,
            sum_l in 0.0..500.0f64, alpha in -0.5..0.5f64, eta in 0.0..1.0f64,
        ) {
            let b = b.min(n - 1).max(1);
            let c = ProblemConstants { n, rho, sigma, sum_l, alpha, ..base() };
            let upper = theorem1_upper_bound(&c, eta, b).unwrap();
            for case in [Theorem2Case::ANonneg, Theorem2Case::ANeg] {
                prop_assert!(theorem2_lower_bound(&c, eta, b, case, 1.0, 1.0).unwrap() <= upper + 1e-12);
            }
        }

        #[test]
        fn small_rho_keeps_lower_bound_non_negative(
            n in 2usize..500, b in 1usize..500, sigma in 0.01..3.0f64,
            sum_l in 0.1..500.0f64, ct in 0.01..1.0f64, frac in 0.0..1.0f64,
        ) {
            let b = b.min(n - 1).max(1);
            let rho = frac * ct * sigma / (2.0 * sum_l);
            let c = ProblemConstants { n, rho, sigma, sum_l, ..base() };
            prop_assert!(theorem2_lower_bound(&c, 1.0, b, Theorem2Case::ANonneg, ct, 1.0).unwrap() >= -1e-15);
        }

        #[test]
        fn windows_grow_with_epsilon_and_shrink_with_constants(
            eps in 1e-4..1.0f64, g in 0.01..10.0f64, sum_l in 1.0..1e4f64, scale in 1.01..4.0f64,
        ) {
            let c = ProblemConstants { epsilon: eps, g, sum_l, ..base() };
            let hi = |c: &ProblemConstants| admissible_eta_window(c, LrKind::Constant, 8).unwrap().1;
            let rho = |c: &ProblemConstants| rho_window(c, 8, Regime::IncreasingBatch).unwrap();
            let bigger_eps = ProblemConstants { epsilon: eps * scale, ..c };
            let bigger_g = ProblemConstants { g: g * scale, ..c };
            let bigger_l = ProblemConstants { sum_l: sum_l * scale, ..c };
            prop_assert!(hi(&bigger_eps) > hi(&c) && rho(&bigger_eps) > rho(&c));
            prop_assert!(hi(&bigger_g) < hi(&c) && rho(&bigger_g) < rho(&c));
            prop_assert!(hi(&bigger_l) < hi(&c) && rho(&bigger_l) < rho(&c));
        }
    }
}
