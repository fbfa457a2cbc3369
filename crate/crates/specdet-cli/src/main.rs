//! specdet: spectral determinant experiments from a TOML config.
//!
//! Every run writes plot-ready CSV tables plus a JSON summary embedding the
//! config echo, its hash, the seed, cutoff and tolerance verdicts; the exit
//! code is 0 exactly when every enabled check passed.

mod cache;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;

use config::{fnv64_hex, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(name = "specdet", about = "spectral determinant experiments", version)]
struct Args {
    /// Path to the experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides run.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Fourier cutoff (overrides run.cutoff).
    #[arg(long)]
    cutoff: Option<u32>,
    /// Disable the eigenvalue cache.
    #[arg(long)]
    no_cache: bool,
}

fn main() -> ExitCode {
    match run_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more tolerance checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run_main() -> Result<bool> {
    let args = Args::parse();
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(cutoff) = args.cutoff {
        cfg.run.cutoff = cutoff;
    }
    if args.no_cache {
        cfg.run.no_cache = true;
    }
    let out_dir = args.out.unwrap_or_else(|| PathBuf::from(&cfg.run.output_dir));

    let config_hash = fnv64_hex(cfg.canonical_toml().as_bytes());
    let start = Instant::now();
    let outcome = run::execute(&cfg, &out_dir)?;
    let wall_ms = start.elapsed().as_millis() as u64;

    let summary = serde_json::json!({
        "experiment": cfg.experiment,
        "config_hash": config_hash,
        "config": cfg,
        "seed": cfg.run.seed,
        "cutoff": cfg.run.cutoff,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "wall_time_ms": wall_ms,
        "verdicts": outcome.verdicts,
        "passed": outcome.passed,
        "details": outcome.details,
        "outputs": outcome.outputs,
    });
    let summary_path = out_dir.join(format!("summary-{}.json", cfg.experiment));
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    println!(
        "{}: {} (summary at {})",
        cfg.experiment,
        if outcome.passed { "PASS" } else { "FAIL" },
        summary_path.display()
    );
    Ok(outcome.passed)
}
