//! Fixtures shared by the benchmarks.

use samlab_core::harness::RunConfig;
use samlab_core::{MlpEnsemble, MlpSpec, QuadraticEnsemble, QuadraticSpec};

pub fn quadratic(n: usize, d: usize) -> QuadraticEnsemble {
    QuadraticSpec {
        n,
        d,
        anchor_seed: 7,
        ..QuadraticSpec::default()
    }
    .build()
    .expect("valid benchmark ensemble")
}

pub fn mlp(n: usize) -> MlpEnsemble {
    MlpSpec {
        n,
        ..MlpSpec::default()
    }
    .build()
    .expect("valid benchmark ensemble")
}

/// A short single-seed run used to time the whole training loop.
pub fn small_run_config() -> RunConfig {
    RunConfig::from_json(
        r#"{
            "ensemble": {"kind": "quadratic", "n": 512, "d": 16, "anchor_seed": 7},
            "sam": {"rho": 0.01, "alpha": 0.02},
            "batch": {"stages": [[16, 2], [32, 2]]},
            "lr": {"kind": "cosine", "lo": 0.0, "hi": 0.05},
            "diagnostics": {"cadence": 8, "sharpness": null}
        }"#,
    )
    .expect("valid benchmark config")
}

#[cfg(test)]
mod tests {
    use samlab_core::LossEnsemble;

    #[test]
    fn fixtures_build() {
        assert_eq!(super::quadratic(64, 4).dim(), 4);
        assert!(super::small_run_config().prepare().is_ok());
        let _ = super::mlp(32);
    }
}
