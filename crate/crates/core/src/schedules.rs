//! Batch-size and learning-rate schedules.
//!
//! Epochs are 0-indexed: a stage `(b, E)` first in the list covers epochs
//! `[0, E)`. The cosine rate depends only on the epoch index and is constant
//! within an epoch.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct BatchStage {
    pub batch_size: usize,
    pub epochs: usize,
}

impl From<(usize, usize)> for BatchStage {
    fn from((batch_size, epochs): (usize, usize)) -> Self {
        Self { batch_size, epochs }
    }
}

impl From<BatchStage> for (usize, usize) {
    fn from(s: BatchStage) -> Self {
        (s.batch_size, s.epochs)
    }
}

/// Non-decreasing batch sizes held for whole epochs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSchedule {
    n: usize,
    stages: Vec<BatchStage>,
}

impl BatchSchedule {
    pub fn new(n: usize, stages: impl IntoIterator<Item = impl Into<BatchStage>>) -> Result<Self> {
        let stages: Vec<BatchStage> = stages.into_iter().map(Into::into).collect();
        if n == 0 {
            return Err(Error::Config("dataset size must be >= 1".into()));
        }
        if stages.is_empty() {
            return Err(Error::Config("batch schedule needs at least one stage".into()));
        }
        for (i, s) in stages.iter().enumerate() {
            if s.batch_size == 0 || s.batch_size > n {
                return Err(Error::Config(format!(
                    "stage {i}: batch size {} not in [1, {n}]",
                    s.batch_size
                )));
            }
            if s.epochs == 0 {
                return Err(Error::Config(format!("stage {i}: epochs must be >= 1")));
            }
        }
        if stages.windows(2).any(|w| w[1].batch_size < w[0].batch_size) {
            return Err(Error::Config("batch sizes must be non-decreasing".into()));
        }
        Ok(Self { n, stages })
    }

    pub fn constant(n: usize, batch_size: usize, epochs: usize) -> Result<Self> {
        Self::new(n, [(batch_size, epochs)])
    }

    /// `b0, 2·b0, 4·b0, ...` (capped at `n`), `epochs_per_stage` each.
    pub fn doubling(n: usize, b0: usize, stage_count: usize, epochs_per_stage: usize) -> Result<Self> {
        let stages: Vec<(usize, usize)> = (0..stage_count)
            .map(|i| ((b0 << i).min(n), epochs_per_stage))
            .collect();
        Self::new(n, stages)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stages(&self) -> &[BatchStage] {
        &self.stages
    }

    pub fn total_epochs(&self) -> usize {
        self.stages.iter().map(|s| s.epochs).sum()
    }

    pub fn batch_at(&self, epoch: usize) -> Result<usize> {
        let mut end = 0;
        for s in &self.stages {
            end += s.epochs;
            if epoch < end {
                return Ok(s.batch_size);
            }
        }
        Err(Error::OutOfRange {
            what: "epoch",
            value: epoch,
            lo: 0,
            hi: end,
        })
    }

    /// `⌈n/b_e⌉`.
    pub fn steps_in_epoch(&self, epoch: usize) -> Result<usize> {
        Ok(self.n.div_ceil(self.batch_at(epoch)?))
    }

    /// `T = Σ_i ⌈n/b_i⌉ E_i`.
    pub fn total_steps(&self) -> usize {
        self.stages
            .iter()
            .map(|s| self.n.div_ceil(s.batch_size) * s.epochs)
            .sum()
    }

    /// Batch size of every epoch, in order.
    pub fn epoch_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.stages
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.batch_size, s.epochs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrKind {
    Constant,
    Cosine,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LrSchedule {
    Constant {
        lr: f64,
    },
    /// `lo + (hi−lo)/2 · (1 + cos(⌊t/K⌋ π/E))`, `t ∈ [0, KE]`.
    Cosine {
        lo: f64,
        hi: f64,
        steps_per_epoch: usize,
        epochs: usize,
    },
    /// `((lo−hi)/T) t + hi`, `t ∈ [0, T]`.
    Linear {
        lo: f64,
        hi: f64,
        total_steps: usize,
    },
    /// Per-epoch linear ramp from `init_lr` to the inner schedule's first
    /// rate over `warmup_epochs`, then the inner schedule unchanged.
    Warmup {
        init_lr: f64,
        warmup_epochs: usize,
        steps_per_epoch: usize,
        inner: Box<LrSchedule>,
    },
}

fn check_bounds(lo: f64, hi: f64) -> Result<()> {
    if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "learning-rate bounds need 0 <= lo <= hi, got lo = {lo}, hi = {hi}"
        )));
    }
    Ok(())
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Result<Self> {
        check_bounds(lr, lr)?;
        Ok(LrSchedule::Constant { lr })
    }

    pub fn cosine(lo: f64, hi: f64, steps_per_epoch: usize, epochs: usize) -> Result<Self> {
        check_bounds(lo, hi)?;
        if steps_per_epoch == 0 || epochs == 0 {
            return Err(Error::InvalidParameter("cosine needs K >= 1 and E >= 1".into()));
        }
        Ok(LrSchedule::Cosine {
            lo,
            hi,
            steps_per_epoch,
            epochs,
        })
    }

    pub fn linear(lo: f64, hi: f64, total_steps: usize) -> Result<Self> {
        check_bounds(lo, hi)?;
        if total_steps == 0 {
            return Err(Error::InvalidParameter("linear needs T >= 1".into()));
        }
        Ok(LrSchedule::Linear { lo, hi, total_steps })
    }

    pub fn warmup(init_lr: f64, warmup_epochs: usize, steps_per_epoch: usize, inner: LrSchedule) -> Result<Self> {
        if !(init_lr >= 0.0) || steps_per_epoch == 0 {
            return Err(Error::InvalidParameter("warmup needs init_lr >= 0 and K >= 1".into()));
        }
        if matches!(inner, LrSchedule::Warmup { .. }) {
            return Err(Error::InvalidParameter("nested warmup".into()));
        }
        Ok(LrSchedule::Warmup {
            init_lr,
            warmup_epochs,
            steps_per_epoch,
            inner: Box::new(inner),
        })
    }

    /// `(η̲, η̄)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            LrSchedule::Constant { lr } => (*lr, *lr),
            LrSchedule::Cosine { lo, hi, .. } | LrSchedule::Linear { lo, hi, .. } => (*lo, *hi),
            LrSchedule::Warmup { init_lr, inner, .. } => {
                let (lo, hi) = inner.bounds();
                (lo.min(*init_lr), hi.max(*init_lr))
            }
        }
    }

    /// Largest valid step index, if bounded.
    pub fn horizon(&self) -> Option<usize> {
        match self {
            LrSchedule::Constant { .. } => None,
            LrSchedule::Cosine {
                steps_per_epoch,
                epochs,
                ..
            } => Some(steps_per_epoch * epochs),
            LrSchedule::Linear { total_steps, .. } => Some(*total_steps),
            LrSchedule::Warmup { inner, .. } => inner.horizon(),
        }
    }

    fn steps_per_epoch(&self) -> usize {
        match self {
            LrSchedule::Cosine { steps_per_epoch, .. } | LrSchedule::Warmup { steps_per_epoch, .. } => {
                *steps_per_epoch
            }
            _ => 1,
        }
    }

    /// Rate at step `t`, deriving the epoch as `⌊t/K⌋`.
    pub fn lr_at(&self, step: usize) -> Result<f64> {
        self.lr_at_position(step, step / self.steps_per_epoch())
    }

    /// Rate at step `t` inside epoch `epoch`. Used when epochs have varying
    /// lengths (increasing batch sizes), where `⌊t/K⌋` is not the epoch.
    pub fn lr_at_position(&self, step: usize, epoch: usize) -> Result<f64> {
        if let Some(h) = self.horizon() {
            if step > h {
                return Err(Error::OutOfRange {
                    what: "step",
                    value: step,
                    lo: 0,
                    hi: h + 1,
                });
            }
        }
        Ok(match self {
            LrSchedule::Constant { lr } => *lr,
            LrSchedule::Cosine { lo, hi, epochs, .. } => {
                let e = epoch.min(*epochs) as f64;
                lo + (hi - lo) / 2.0 * (1.0 + (e * PI / *epochs as f64).cos())
            }
            LrSchedule::Linear { lo, hi, total_steps } => {
                (lo - hi) / *total_steps as f64 * step as f64 + hi
            }
            LrSchedule::Warmup {
                init_lr,
                warmup_epochs,
                inner,
                ..
            } => {
                if epoch < *warmup_epochs {
                    let target = inner.lr_at_position(0, 0)?;
                    init_lr + (target - init_lr) * epoch as f64 / *warmup_epochs as f64
                } else {
                    inner.lr_at_position(step, epoch)?
                }
            }
        })
    }
}

/// Sums of a schedule over `t ∈ [0, T)` with the closed-form constants that
/// bound them: `T/Ση ≤ H1` and `Ση²/Ση ≤ H2 + H3/T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleAggregates {
    pub sum_eta: f64,
    pub sum_eta_sq: f64,
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub steps: usize,
}

impl ScheduleAggregates {
    pub fn ratio_h1(&self) -> f64 {
        self.steps as f64 / self.sum_eta
    }

    pub fn ratio_h2(&self) -> f64 {
        self.sum_eta_sq / self.sum_eta
    }
}

/// Closed-form `(H1, H2, H3)` for a constant, cosine or linear schedule.
///
/// `H1` and `H2` are the usual constants. `H3` is chosen so that
/// `Ση²/Ση ≤ H2 + H3/T` holds for every valid horizon:
/// - cosine: `K(η̄−η̲)`, since `Σ_{t<KE} η_t² = KE(3η̲²+2η̲η̄+3η̄²)/8 + K(η̄²−η̲²)/2`;
///   the familiar `η̄−η̲` is only valid for `K = 1`.
/// - linear: `2(η̄−η̲)η̄(2η̲+η̄)/(3(η̲+η̄)²)`, from
///   `Σ_{t<T} η_t² = T(η̲²+η̲η̄+η̄²)/3 + (η̄²−η̲²)/2 + (η̄−η̲)²/(6T)`;
///   it is zero only when `η̲ = η̄`.
pub fn h_constants(sched: &LrSchedule) -> Result<(f64, f64, f64)> {
    let (lo, hi) = sched.bounds();
    if hi <= 0.0 {
        return Err(Error::InvalidParameter("H constants need a positive rate".into()));
    }
    Ok(match sched {
        LrSchedule::Constant { lr } => (1.0 / lr, *lr, 0.0),
        LrSchedule::Cosine { steps_per_epoch, .. } => (
            2.0 / (lo + hi),
            (3.0 * lo * lo + 2.0 * lo * hi + 3.0 * hi * hi) / (4.0 * (lo + hi)),
            *steps_per_epoch as f64 * (hi - lo),
        ),
        LrSchedule::Linear { .. } => (
            2.0 / (lo + hi),
            2.0 * (lo * lo + lo * hi + hi * hi) / (3.0 * (lo + hi)),
            2.0 * (hi - lo) * hi * (2.0 * lo + hi) / (3.0 * (lo + hi) * (lo + hi)),
        ),
        LrSchedule::Warmup { .. } => {
            return Err(Error::InvalidParameter("no closed-form H constants for warmup schedules".into()))
        }
    })
}

const AGG_REL_TOL: f64 = 1e-12;

/// Sums the schedule over `[0, steps)` and checks both aggregate
/// inequalities against the closed-form H constants.
pub fn aggregates(sched: &LrSchedule, steps: usize) -> Result<ScheduleAggregates> {
    if steps == 0 {
        return Err(Error::InvalidParameter("aggregates need T >= 1".into()));
    }
    let (h1, h2, h3) = h_constants(sched)?;
    let mut sum_eta = 0.0;
    let mut sum_eta_sq = 0.0;
    for t in 0..steps {
        let eta = sched.lr_at(t)?;
        sum_eta += eta;
        sum_eta_sq += eta * eta;
    }
    let agg = ScheduleAggregates {
        sum_eta,
        sum_eta_sq,
        h1,
        h2,
        h3,
        steps,
    };
    if agg.ratio_h1() > h1 * (1.0 + AGG_REL_TOL) {
        return Err(Error::ScheduleInequality(format!(
            "T/sum(eta) = {} exceeds H1 = {h1}",
            agg.ratio_h1()
        )));
    }
    let rhs = h2 + h3 / steps as f64;
    if agg.ratio_h2() > rhs * (1.0 + AGG_REL_TOL) {
        return Err(Error::ScheduleInequality(format!(
            "sum(eta^2)/sum(eta) = {} exceeds H2 + H3/T = {rhs}",
            agg.ratio_h2()
        )));
    }
    Ok(agg)
}

/// Exact `(Ση, Ση²)` of the cosine schedule over `t ∈ [0, KE)`, any `K`.
///
/// Uses `Σ_t cos(⌊t/K⌋π/E) = K` and `Σ_t cos²(⌊t/K⌋π/E) = KE/2` (for
/// `E ≥ 2`; `K` when `E = 1`).
pub fn cosine_sums_closed_form(lo: f64, hi: f64, k: usize, e: usize) -> (f64, f64) {
    let ke = (k * e) as f64;
    let c1 = k as f64;
    let c2 = if e == 1 { k as f64 } else { ke / 2.0 };
    let span = hi - lo;
    let sum = lo * ke + span / 2.0 * (ke + c1);
    let sum_sq = lo * lo * ke + lo * span * (ke + c1) + span * span / 4.0 * (ke + 2.0 * c1 + c2);
    (sum, sum_sq)
}

/// The frequently quoted form `Ση = ½{(η̲+η̄)KE + η̄−η̲}`,
/// `Ση² = (3η̲²+2η̲η̄+3η̄²)KE/8 + (η̄−η̲)(η̄+η̲)/2`. It assumes
/// `Σ_t cos(⌊t/K⌋π/E) = 1`, which holds only for `K = 1`; for `K > 1` it
/// undercounts by `(K−1)` copies of that term.
pub fn cosine_sums_unit_epoch_form(lo: f64, hi: f64, k: usize, e: usize) -> (f64, f64) {
    let ke = (k * e) as f64;
    let sum = 0.5 * ((lo + hi) * ke + hi - lo);
    let sum_sq = (3.0 * lo * lo + 2.0 * lo * hi + 3.0 * hi * hi) / 8.0 * ke + (hi - lo) * (hi + lo) / 2.0;
    (sum, sum_sq)
}

/// Exact `(Ση, Ση²)` of the linear schedule over `t ∈ [0, T)`.
pub fn linear_sums_closed_form(lo: f64, hi: f64, total_steps: usize) -> (f64, f64) {
    let t = total_steps as f64;
    let sum = 0.5 * ((lo + hi) * t + hi - lo);
    let slope = lo - hi;
    let sum_sq = slope * slope * (t - 1.0) * (2.0 * t - 1.0) / (6.0 * t) + slope * hi * (t - 1.0) + hi * hi * t;
    (sum, sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cifar_stages() -> BatchSchedule {
        BatchSchedule::new(50_000, [(8, 40), (16, 40), (32, 40), (64, 40), (128, 40)]).unwrap()
    }

    #[test]
    fn batch_at_examples() {
        let s = cifar_stages();
        assert_eq!(s.batch_at(0).unwrap(), 8);
        assert_eq!(s.batch_at(39).unwrap(), 8);
        assert_eq!(s.batch_at(40).unwrap(), 16);
        assert_eq!(s.batch_at(199).unwrap(), 128);
        assert!(matches!(s.batch_at(200), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn total_steps_examples() {
        assert_eq!(cifar_stages().total_steps(), 484_440);
        assert_eq!(BatchSchedule::constant(50_000, 128, 200).unwrap().total_steps(), 78_200);
        assert_eq!(BatchSchedule::constant(77, 77, 13).unwrap().total_steps(), 13);
    }

    #[test]
    fn schedule_validation() {
        assert!(BatchSchedule::new(10, [(4, 1), (2, 1)]).is_err());
        assert!(BatchSchedule::new(10, [(11, 1)]).is_err());
        assert!(BatchSchedule::new(10, [(0, 1)]).is_err());
        assert!(BatchSchedule::new(10, [(2, 0)]).is_err());
        assert!(BatchSchedule::new(10, Vec::<(usize, usize)>::new()).is_err());
        let d = BatchSchedule::doubling(1024, 8, 5, 3).unwrap();
        let sizes: Vec<usize> = d.stages().iter().map(|s| s.batch_size).collect();
        assert_eq!(sizes, vec![8, 16, 32, 64, 128]);
    }

    #[test]
    fn cosine_examples() {
        let c = LrSchedule::cosine(0.001, 0.1, 5, 10).unwrap();
        assert_eq!(c.lr_at(0).unwrap(), 0.1);
        assert!((c.lr_at(50).unwrap() - 0.001).abs() < 1e-15);
        assert!(c.lr_at(51).is_err());
        let c = LrSchedule::cosine(0.0, 0.1, 1, 2).unwrap();
        assert!((c.lr_at(1).unwrap() - 0.05).abs() < 1e-15);
        // constant inside an epoch
        let c = LrSchedule::cosine(0.0, 0.1, 4, 3).unwrap();
        assert_eq!(c.lr_at(4).unwrap(), c.lr_at(7).unwrap());
    }

    #[test]
    fn linear_examples() {
        let l = LrSchedule::linear(0.0, 0.1, 10).unwrap();
        assert!((l.lr_at(5).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(l.lr_at(10).unwrap(), 0.0);
        assert!(l.lr_at(11).is_err());
    }

    #[test]
    fn warmup_ramps_then_delegates() {
        let inner = LrSchedule::constant(0.001).unwrap();
        let w = LrSchedule::warmup(1e-5, 10, 4, inner).unwrap();
        assert_eq!(w.lr_at(0).unwrap(), 1e-5);
        assert_eq!(w.lr_at(3).unwrap(), 1e-5);
        let mid = w.lr_at(20).unwrap();
        assert!((mid - (1e-5 + (0.001 - 1e-5) * 0.5)).abs() < 1e-18);
        assert_eq!(w.lr_at(40).unwrap(), 0.001);
        let (lo, hi) = w.bounds();
        for t in 0..100 {
            let r = w.lr_at(t).unwrap();
            assert!(r >= lo && r <= hi);
        }
    }

    #[test]
    fn aggregates_examples() {
        let a = aggregates(&LrSchedule::constant(0.1).unwrap(), 100).unwrap();
        assert!((a.sum_eta - 10.0).abs() < 1e-12);
        assert!((a.h1 - 10.0).abs() < 1e-12);
        assert_eq!((a.h2, a.h3), (0.1, 0.0));

        let a = aggregates(&LrSchedule::cosine(0.0, 0.1, 1, 4).unwrap(), 4).unwrap();
        assert!((a.sum_eta - 0.25).abs() < 1e-15);
        assert!((cosine_sums_unit_epoch_form(0.0, 0.1, 1, 4).0 - 0.25).abs() < 1e-15);

        let a = aggregates(&LrSchedule::linear(0.0, 0.1, 2).unwrap(), 2).unwrap();
        assert!((a.sum_eta - 0.15).abs() < 1e-15);
        assert!((linear_sums_closed_form(0.0, 0.1, 2).0 - 0.15).abs() < 1e-15);
    }

    fn ratio_h2(s: &LrSchedule, steps: usize) -> f64 {
        let rates: Vec<f64> = (0..steps).map(|t| s.lr_at(t).unwrap()).collect();
        rates.iter().map(|r| r * r).sum::<f64>() / rates.iter().sum::<f64>()
    }

    #[test]
    fn unit_h3_fails_for_long_cosine_epochs() {
        // With η̲ = 0 and H3 = η̄ − η̲ the bound needs K <= 4 + 4/E.
        let hi = 0.1;
        let h2 = 3.0 * hi / 4.0;
        let ok = LrSchedule::cosine(0.0, hi, 4, 10).unwrap();
        assert!(ratio_h2(&ok, 40) <= h2 + hi / 40.0);
        let long = LrSchedule::cosine(0.0, hi, 32, 10).unwrap();
        assert!(ratio_h2(&long, 320) > h2 + hi / 320.0);
        assert!(aggregates(&long, 320).is_ok());
    }

    #[test]
    fn zero_h3_fails_for_linear() {
        let l = LrSchedule::linear(0.0, 0.1, 2).unwrap();
        assert!((ratio_h2(&l, 2) - 0.0125 / 0.15).abs() < 1e-15);
        assert!(ratio_h2(&l, 2) > 2.0 * 0.1 / 3.0);
        let (_, _, h3) = h_constants(&l).unwrap();
        assert!((h3 - 2.0 * 0.1 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_inequalities_hold_on_grids() {
        for (lo, hi) in [(0.0, 0.1), (0.001, 0.1), (0.05, 0.1), (0.1, 0.1), (0.0, 2.0)] {
            for k in [1, 2, 4, 7, 32] {
                for e in [1, 2, 3, 8, 100] {
                    aggregates(&LrSchedule::cosine(lo, hi, k, e).unwrap(), k * e).unwrap();
                }
            }
            for t in 1..300 {
                aggregates(&LrSchedule::linear(lo, hi, t).unwrap(), t).unwrap();
            }
        }
    }

    #[test]
    fn cosine_closed_forms_against_summation() {
        for (k, e) in [(1, 3), (2, 3), (4, 8), (3, 100), (7, 1)] {
            let s = LrSchedule::cosine(0.01, 0.3, k, e).unwrap();
            let (mut sum, mut sq) = (0.0, 0.0);
            for t in 0..k * e {
                let r = s.lr_at(t).unwrap();
                sum += r;
                sq += r * r;
            }
            let (cs, csq) = cosine_sums_closed_form(0.01, 0.3, k, e);
            assert!((cs - sum).abs() <= 1e-12 * sum);
            assert!((csq - sq).abs() <= 1e-12 * sq);
            let (us, _) = cosine_sums_unit_epoch_form(0.01, 0.3, k, e);
            if k == 1 {
                assert!((us - sum).abs() <= 1e-12 * sum);
            } else {
                assert!((us - sum).abs() > 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn decaying_rates_are_monotone_and_bounded(
            lo in 0.0..0.05f64, span in 0.0..1.0f64, k in 1usize..6, e in 1usize..30
        ) {
            let hi = lo + span;
            let c = LrSchedule::cosine(lo, hi, k, e).unwrap();
            let l = LrSchedule::linear(lo, hi, k * e).unwrap();
            for s in [&c, &l] {
                let mut prev = f64::INFINITY;
                for t in 0..=k * e {
                    let r = s.lr_at(t).unwrap();
                    prop_assert!(r <= prev + 1e-15);
                    prop_assert!(r >= lo - 1e-15 && r <= hi + 1e-15);
                    prev = r;
                }
            }
        }

        #[test]
        fn total_steps_matches_simulated_epoch_loop(
            n in 1usize..5000,
            raw in prop::collection::vec((1usize..400, 1usize..6), 1..6)
        ) {
            let mut sizes: Vec<usize> = raw.iter().map(|(b, _)| (*b).min(n)).collect();
            sizes.sort_unstable();
            let stages: Vec<(usize, usize)> = sizes.iter().zip(&raw).map(|(b, (_, e))| (*b, *e)).collect();
            let s = BatchSchedule::new(n, stages).unwrap();
            let mut steps = 0;
            for (epoch, b) in s.epoch_sizes().enumerate() {
                let mut seen = 0;
                while seen < n {
                    seen += b;
                    steps += 1;
                }
                prop_assert_eq!(s.batch_at(epoch).unwrap(), b);
            }
            prop_assert_eq!(steps, s.total_steps());
        }
    }
}
