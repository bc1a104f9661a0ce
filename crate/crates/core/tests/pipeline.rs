use std::path::PathBuf;

use proptest::prelude::*;
use samlab_core::harness::{aggregate_runs, read_summary, run, run_seeds, sweep, write_run_dir, RunConfig, RunTrace};

fn config(stages: &str, lr: &str, diagnostics: &str) -> RunConfig {
    RunConfig::from_json(&format!(
        r#"{{
            "ensemble": {{"kind": "quadratic", "n": 40, "d": 3, "anchor_seed": 9}},
            "sam": {{"rho": 0.02, "alpha": 0.03}},
            "batch": {{"stages": {stages}}},
            "lr": {lr},
            "seeds": [5, 6, 7],
            "diagnostics": {diagnostics}
        }}"#
    ))
    .unwrap()
}

fn shipped_configs() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
}

#[test]
fn shipped_configs_load_and_prepare() {
    let paths = shipped_configs();
    assert!(!paths.is_empty());
    for p in paths {
        let cfg = RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.prepare().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn diagnostics_never_perturb_the_trajectory() {
    let stages = "[[4, 2], [8, 2]]";
    let lr = r#"{"kind": "cosine", "lo": 0.0, "hi": 0.2}"#;
    let quiet = config(stages, lr, r#"{"cadence": 1000, "sharpness": null}"#);
    let busy = config(
        stages,
        lr,
        r#"{"cadence": 1, "noise_trials": 100, "sharpness": {"radius": 0.01}}"#,
    );
    for seed in [5, 6] {
        let a = run(&quiet, seed).unwrap();
        let b = run(&busy, seed).unwrap();
        assert_eq!(a.final_x, b.final_x);
        let losses = |t: &RunTrace| t.records.iter().map(|r| r.minibatch_loss).collect::<Vec<_>>();
        assert_eq!(losses(&a), losses(&b));
        assert!(b.records.iter().all(|r| r.noise_mean.is_some()));
    }
}

#[test]
fn three_seed_aggregate_matches_trace_length() {
    let cfg = config("[[8, 4]]", r#"{"kind": "linear", "lo": 0.0, "hi": 0.1}"#, "{}");
    let traces = run_seeds(&cfg).unwrap();
    let agg = aggregate_runs(&traces).unwrap();
    assert_eq!(agg.rows.len(), traces[0].records.len());
    assert_eq!(agg.seeds, vec![5, 6, 7]);
}

#[test]
fn sweep_entries_equal_standalone_runs() {
    let base = config("[[8, 2]]", r#"{"kind": "constant", "hi": 0.1}"#, r#"{"sharpness": null}"#);
    let grid = vec![("sam.alpha".to_string(), vec![serde_json::json!(0.0), serde_json::json!(0.05)])];
    let result = sweep(&base, &grid).unwrap();
    assert_eq!(result.run_count(), 6);
    for entry in &result.entries {
        assert_eq!(entry.traces.len(), 3);
        let alone = run_seeds(&entry.config).unwrap();
        for (a, b) in alone.iter().zip(&entry.traces) {
            assert_eq!(a.records, b.records);
            assert_eq!(a.final_x, b.final_x);
        }
    }
}

#[test]
fn rewriting_a_run_dir_is_byte_identical() {
    let cfg = config("[[4, 1], [8, 1]]", r#"{"kind": "constant", "hi": 0.1}"#, r#"{"cadence": 3}"#);
    let traces = run_seeds(&cfg).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let summary = write_run_dir(a.path(), &cfg, &traces).unwrap();
    write_run_dir(b.path(), &cfg, &run_seeds(&cfg).unwrap()).unwrap();
    for name in ["trace_seed5.csv", "aggregate.csv", "checkpoint_seed7.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    assert_eq!(read_summary(&a.path().join("summary.json")).unwrap(), summary);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn records_match_the_schedules(
        sizes in prop::collection::vec(1usize..=40, 1..4),
        epochs in prop::collection::vec(1usize..3, 4),
        kind in prop::sample::select(vec!["constant", "cosine", "linear"]),
        warmup in 0usize..2,
    ) {
        let mut sizes = sizes;
        sizes.sort_unstable();
        let stages: Vec<(usize, usize)> = sizes.iter().zip(&epochs).map(|(&b, &e)| (b, e)).collect();
        let lr = format!(r#"{{"kind": "{kind}", "lo": 0.001, "hi": 0.05, "warmup_epochs": {warmup}, "init_lr": 0.001}}"#);
        let cfg = config(&serde_json::to_string(&stages).unwrap(), &lr, r#"{"sharpness": null}"#);
        let prepared = cfg.prepare().unwrap();
        let trace = run(&cfg, 1).unwrap();
        prop_assert_eq!(trace.records.len(), prepared.total_steps);
        for (i, r) in trace.records.iter().enumerate() {
            prop_assert_eq!(r.step, i);
            prop_assert_eq!(r.batch_size, prepared.batch.batch_at(r.epoch).unwrap());
            prop_assert_eq!(r.lr, prepared.lr.lr_at_position(r.step, r.epoch).unwrap());
        }
        for (e, _) in prepared.batch.epoch_sizes().enumerate() {
            let count = trace.records.iter().filter(|r| r.epoch == e).count();
            prop_assert_eq!(count, 40usize.div_ceil(prepared.batch.batch_at(e).unwrap()));
        }
    }
}
