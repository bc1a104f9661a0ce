//! Experiment orchestration: configs, the training loop, multi-seed
//! aggregation, CSV/JSON output and grid sweeps.

mod config;
mod export;
mod run;
mod sweep;

pub use config::{BatchConfig, DiagnosticsConfig, LrConfig, Prepared, RunConfig};
pub use export::{
    export_aggregate_csv, export_trace_csv, read_checkpoint, read_summary, write_json, write_run_dir, Checkpoint, RunSummary,
    SeedSummary, AGGREGATE_COLUMNS, CSV_HEADER,
};
pub use run::{aggregate_runs, run, run_seeds, AggregateRow, AggregateTable, ColumnStats, RunTrace, StepRecord};
pub use sweep::{apply_override, parse_grid_arg, sweep, SweepEntry, SweepResult, GRID_KEYS};
