use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use samlab_core::checks::{all_passed, run_checks, CheckKind};
use samlab_core::diagnostics::adaptive_sharpness;
use samlab_core::harness::{parse_grid_arg, read_checkpoint, run_seeds, sweep, write_json, write_run_dir, RunConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "samlab", version, about = "Mini-batch noise and convergence experiments for SAM and GSAM")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one config over its seeds and write traces, checkpoints and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; falls back to `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds replacing the configured ones.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Run the Cartesian product of one or more `KEY=V1,V2,...` grids.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required = true)]
        grid: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical self-checks; exits 1 when a gating row fails.
    Check {
        #[arg(value_parser = CheckKind::NAMES)]
        which: String,
        /// Print rows as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Adaptive sharpness of a saved checkpoint.
    Sharpness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Overrides the configured radius.
        #[arg(long)]
        radius: Option<f64>,
        /// Overrides the checkpoint's seed for the random restarts.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// A problem with the invocation or its inputs (exit code 2).
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Completed normally but a gating check failed (exit code 1).
struct ChecksFailed;

fn usage(e: samlab_core::Error) -> anyhow::Error {
    if e.is_config_error() {
        Usage(e.to_string()).into()
    } else {
        e.into()
    }
}

fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    RunConfig::load(path).map_err(|e| Usage(format!("{}: {e}", path.display())).into())
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("SAMLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Usage(format!("SAMLAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the thread pool")
}

fn cmd_run(config: &Path, out: Option<PathBuf>, seeds: Option<Vec<u64>>) -> anyhow::Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(seeds) = seeds {
        cfg.seeds = seeds;
    }
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Usage("no output directory: pass --out or set output_dir".into()))?;
    cfg.prepare().map_err(usage)?;
    let traces = run_seeds(&cfg).map_err(usage)?;
    let summary = write_run_dir(&out, &cfg, &traces)?;

    println!("config {}", summary.config_hash);
    println!("{:>8} {:>14} {:>14} {:>14} {:>10}", "seed", "final_loss", "test_loss", "sharpness", "secs");
    for r in &summary.runs {
        let sharp = r.final_sharpness.map_or("-".to_string(), |s| format!("{s:.6e}"));
        println!(
            "{:>8} {:>14.6e} {:>14.6e} {:>14} {:>10.3}",
            r.seed, r.final_loss, r.test_loss, sharp, r.wall_clock_secs
        );
    }
    if let Some(v) = &summary.verdict {
        println!(
            "verdict: {} (min seed-averaged SAM gradient norm {:.6e} at step {})",
            if v.achieved { "converged" } else { "not converged" },
            v.min_grad_norm,
            v.argmin_step
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_sweep(config: &Path, grid: &[String], out: Option<PathBuf>) -> anyhow::Result<()> {
    let base = load_config(config)?;
    let grid = grid
        .iter()
        .map(|g| parse_grid_arg(g))
        .collect::<Result<Vec<_>, _>>()
        .map_err(usage)?;
    let result = sweep(&base, &grid).map_err(usage)?;

    let label = |i: usize| {
        result.entries[i]
            .assignment
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("{} configs, {} runs", result.entries.len(), result.run_count());
    println!("by final loss:");
    for (rank, &i) in result.by_final_loss.iter().enumerate() {
        println!("{:>4}  {:<14.6e} {}", rank + 1, result.entries[i].aggregate.final_loss.mean, label(i));
    }
    println!("by sharpness:");
    for (rank, &i) in result.by_sharpness.iter().enumerate() {
        let s = result.entries[i]
            .aggregate
            .sharpness
            .map_or("-".to_string(), |s| format!("{:.6e}", s.mean));
        println!("{:>4}  {:<14} {}", rank + 1, s, label(i));
    }

    if let Some(out) = out {
        let mut index = Vec::new();
        for (i, e) in result.entries.iter().enumerate() {
            let dir = out.join(format!("entry{i}"));
            write_run_dir(&dir, &e.config, &e.traces)?;
            index.push(json!({
                "entry": i,
                "dir": format!("entry{i}"),
                "assignment": e.assignment.iter().map(|(k, v)| (k.clone(), v.clone())).collect::<serde_json::Map<_, _>>(),
                "config_hash": e.aggregate.config_hash,
                "final_loss": e.aggregate.final_loss,
                "test_loss": e.aggregate.test_loss,
                "sharpness": e.aggregate.sharpness,
            }));
        }
        let doc = json!({
            "entries": index,
            "by_final_loss": result.by_final_loss,
            "by_sharpness": result.by_sharpness,
        });
        write_json(&doc, &out.join("sweep.json"))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_check(which: &str, as_json: bool) -> anyhow::Result<Result<(), ChecksFailed>> {
    let kind: CheckKind = which.parse().map_err(usage)?;
    let rows = run_checks(kind)?;
    if as_json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        for r in &rows {
            println!("{r}");
        }
    }
    let passed = all_passed(&rows);
    let failed = rows.iter().filter(|r| r.gating && !r.pass).count();
    if !as_json {
        println!("{} rows, {failed} gating failures", rows.len());
    }
    Ok(if passed { Ok(()) } else { Err(ChecksFailed) })
}

fn cmd_sharpness(config: &Path, checkpoint: &Path, radius: Option<f64>, seed: Option<u64>) -> anyhow::Result<()> {
    let cfg = load_config(config)?;
    let ck = read_checkpoint(checkpoint).map_err(|e| Usage(format!("{}: {e}", checkpoint.display())))?;
    if ck.config_hash != cfg.hash() {
        eprintln!("warning: checkpoint was written by config {}, not {}", ck.config_hash, cfg.hash());
    }
    let ens = cfg.ensemble.build().map_err(usage)?;
    let mut spec = cfg.diagnostics.sharpness.clone().unwrap_or_default();
    if let Some(r) = radius {
        spec.radius = r;
    }
    let s = adaptive_sharpness(&ens, &ck.x, &spec, seed.unwrap_or(ck.seed)).map_err(usage)?;
    println!("{s:.17e}");
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<Result<(), ChecksFailed>> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, out, seeds } => cmd_run(&config, out, seeds).map(Ok),
        Command::Sweep { config, grid, out } => cmd_sweep(&config, &grid, out).map(Ok),
        Command::Check { which, json } => cmd_check(&which, json),
        Command::Sharpness {
            config,
            checkpoint,
            radius,
            seed,
        } => cmd_sharpness(&config, &checkpoint, radius, seed).map(Ok),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(ChecksFailed)) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
