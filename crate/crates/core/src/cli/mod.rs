//! Batch front end: `run <config>` and `sweep <config>`.

pub mod config;
pub mod experiments;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::lab::drift;

pub use config::{Cell, ExperimentConfig, ExperimentKind};
pub use experiments::{run_cell, CsvRow};

/// Largest sweep accepted by `sweep`.
pub const MAX_CELLS: usize = 512;

pub const CSV_HEADER: &str = "p,beta,alpha,N,M,trials,ratio,stderr,family,seed";

#[derive(Debug, Parser)]
#[command(name = "conical-lab", version, about = "Conical stochastic maximal regularity experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Override the seed in the config's `[noise]` section.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core). Changes wall-clock only.
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, global = true, default_value = "results")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Run a config describing exactly one (p, β, α, N) cell.
    Run { config: PathBuf },
    /// Run the cartesian product of the config's lists.
    Sweep { config: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Sweep,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: usize,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub csv: PathBuf,
    pub jsonl: PathBuf,
    pub drift: PathBuf,
    pub rows: Vec<CsvRow>,
    pub config_hash: String,
}

/// Stable hash of the effective configuration (after overrides).
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let canonical = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&canonical);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

/// Parses, validates and runs a config, writing `<stem>.csv`, `<stem>.jsonl`
/// and `<stem>_drift.csv` under `out_dir`.
pub fn execute(config_path: &Path, mode: Mode, opts: &RunOptions) -> Result<RunOutcome> {
    let mut cfg = ExperimentConfig::from_path(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.noise.seed = seed;
    }
    cfg.validate()?;
    let cells = cfg.cells();
    match mode {
        Mode::Run if cells.len() != 1 => {
            return Err(LabError::Config(format!(
                "`run` expects exactly one (p, β, α, N) cell, the config describes {}; use `sweep`",
                cells.len()
            )))
        }
        Mode::Sweep if cells.len() > MAX_CELLS => {
            return Err(LabError::Config(format!(
                "sweep of {} cells refused (limit {MAX_CELLS})",
                cells.len()
            )))
        }
        _ => {}
    }
    let stem = cfg.output.clone().unwrap_or_else(|| {
        config_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "experiment".into())
    });
    let hash = config_hash(&cfg)?;
    let seed = cfg.noise.seed;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| LabError::Config(format!("--workers: {e}")))?;
    let results: Vec<(experiments::CellOutput, f64)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| {
                let start = Instant::now();
                let out = run_cell(&cfg, cell, seed)?;
                Ok((out, start.elapsed().as_secs_f64()))
            })
            .collect::<Result<_>>()
    })?;

    std::fs::create_dir_all(&opts.out_dir)?;
    let csv_path = opts.out_dir.join(format!("{stem}.csv"));
    let jsonl_path = opts.out_dir.join(format!("{stem}.jsonl"));
    let drift_path = opts.out_dir.join(format!("{stem}_drift.csv"));

    let rows: Vec<CsvRow> = results.iter().flat_map(|(o, _)| o.rows.iter().cloned()).collect();
    write_csv(&csv_path, &rows)?;

    let mut jsonl = BufWriter::new(File::create(&jsonl_path)?);
    for (cell, (out, secs)) in cells.iter().zip(&results) {
        for report in &out.reports {
            let record = json!({
                "config_hash": hash,
                "kind": cfg.kind.name(),
                "version": env!("CARGO_PKG_VERSION"),
                "wall_clock_s": secs,
                "cell": cell,
                "seed": seed,
                "config": cfg,
                "report": report,
            });
            serde_json::to_writer(&mut jsonl, &record)?;
            jsonl.write_all(b"\n")?;
        }
    }
    jsonl.flush()?;
    write_drift(&drift_path, &rows, &hash)?;

    Ok(RunOutcome {
        csv: csv_path,
        jsonl: jsonl_path,
        drift: drift_path,
        rows,
        config_hash: hash,
    })
}

fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(CSV_HEADER.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Max/min ratio across `N` for rows that agree on everything else.
fn write_drift(path: &Path, rows: &[CsvRow], hash: &str) -> Result<()> {
    let mut groups: BTreeMap<(String, String, String, usize, String), Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        let key = (r.family.clone(), r.p.to_string(), r.beta.to_string(), r.nodes, r.alpha.to_string());
        groups.entry(key).or_default().push((r.points, r.ratio));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p", "beta", "alpha", "M", "family", "N_values", "drift", "config_hash"])?;
    for ((family, p, beta, m, alpha), vals) in groups {
        if vals.len() < 2 {
            continue;
        }
        let ns: Vec<String> = vals.iter().map(|v| v.0.to_string()).collect();
        let ratios: Vec<f64> = vals.iter().map(|v| v.1).collect();
        w.write_record([
            p,
            beta,
            alpha,
            m.to_string(),
            family,
            ns.join(" "),
            drift(&ratios).to_string(),
            hash.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let opts = RunOptions {
        seed: cli.seed,
        workers: cli.workers,
        out_dir: cli.out_dir.clone(),
    };
    let (mode, path) = match &cli.command {
        Command::Run { config } => (Mode::Run, config),
        Command::Sweep { config } => (Mode::Sweep, config),
    };
    match execute(path, mode, &opts) {
        Ok(out) => {
            println!("wrote {} rows to {}", out.rows.len(), out.csv.display());
            println!("records: {}", out.jsonl.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
