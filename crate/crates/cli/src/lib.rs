//! Command-line front end: analytic curves, kernel surfaces, homodyne
//! simulation, direct sampling and reproducibility checks.
//!
//! Every command writes into an output directory, saves the effective
//! configuration as `run_config.toml` and records sha256 hashes of its files in
//! `MANIFEST`; `check` re-runs the recorded commands in a scratch directory and
//! compares hashes.

// NaN-rejecting checks are written as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::Context;
pub use config::RunConfig;
pub use error::CliError;

pub const CACHE_ENV: &str = "CPS_KERNEL_CACHE";

#[derive(Debug, Parser)]
#[command(name = "cps", version, about = "Coherent-phase-state distributions from homodyne data")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (default: `out` in the config, else `./out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    pub threads: usize,
    /// Directory for cached pattern-function tables.
    #[arg(long, global = true, value_name = "PATH", env = CACHE_ENV)]
    pub kernel_cache: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// CPS distributions for each configured epsilon, plus the London limit.
    Analytic,
    /// Sampling-kernel surfaces over field strength and sum phase.
    Kernel,
    /// Simulated homodyne dataset with per-phase variances and histograms.
    Simulate,
    /// Direct sampling of the CPS distribution from a dataset.
    Estimate {
        /// Dataset file (default: `dataset.csv` in the output directory).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Distribution CSV to compare against.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Distances and z-scores between two distribution CSVs.
    Compare { a: PathBuf, b: PathBuf },
    /// Re-runs the commands recorded in the output directory and compares hashes.
    Check,
}

fn absolute(p: &Path) -> Result<PathBuf, CliError> {
    std::path::absolute(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config: a run configuration is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Estimate {
        dataset,
        reference,
        epsilon,
    } = &cli.command
    {
        if let Some(d) = dataset {
            cfg.estimate.dataset = Some(d.clone());
        }
        if let Some(r) = reference {
            cfg.estimate.reference = Some(r.clone());
        }
        if let Some(e) = epsilon {
            cfg.estimate.epsilon = *e;
        }
    }
    // paths are stored absolute so the saved config replays from anywhere
    for v in [&mut cfg.estimate.dataset, &mut cfg.estimate.reference].into_iter().flatten() {
        *v = absolute(v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn command_label(cmd: &Command) -> &'static str {
    match cmd {
        Command::Analytic => "analytic",
        Command::Kernel => "kernel",
        Command::Simulate => "simulate",
        Command::Estimate { .. } => "estimate",
        Command::Compare { .. } => "compare",
        Command::Check => "check",
    }
}

/// Runs a config-driven command in `ctx`: saves the config, runs, records the
/// manifest, then surfaces any deferred failure.
pub fn run_command(ctx: &Context, label: &str) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(&ctx.out).map_err(|e| CliError::Io(format!("{}: {e}", ctx.out.display())))?;
    let mut saved = ctx.config.clone();
    saved.out = None;
    saved.kernel_cache = None;
    std::fs::write(ctx.out.join(manifest::RUN_CONFIG), saved.to_toml())?;
    let (mut files, failure) = match label {
        "analytic" => commands::analytic(ctx)?,
        "kernel" => commands::kernel(ctx)?,
        "simulate" => commands::simulate(ctx)?,
        "estimate" => commands::estimate(ctx)?,
        other => return Err(CliError::Config(format!("unknown command {other}"))),
    };
    files.push(manifest::RUN_CONFIG.into());
    manifest::record(&ctx.out, label, &files)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(files),
    }
}

/// Per-file result of [`check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckLine {
    pub path: String,
    pub ok: bool,
    pub detail: String,
}

/// Replays every recorded command in a scratch directory with the saved
/// configuration and compares file hashes against `MANIFEST`.
pub fn check(out: &Path, kernel_cache: Option<PathBuf>) -> Result<Vec<CheckLine>, CliError> {
    let entries = manifest::read(out)?;
    if entries.is_empty() {
        return Err(CliError::Io(format!("{}: no MANIFEST to check", out.display())));
    }
    let config = RunConfig::load(&out.join(manifest::RUN_CONFIG))?;
    let scratch = tempfile::tempdir()?;
    let out_abs = absolute(out)?;
    let mut replayed: Vec<String> = Vec::new();
    for e in &entries {
        if replayed.contains(&e.command) {
            continue;
        }
        replayed.push(e.command.clone());
        let ctx = Context {
            config: config.clone(),
            out: scratch.path().to_path_buf(),
            kernel_cache: kernel_cache.clone(),
        };
        let mut words = e.command.split('\t');
        match words.next().unwrap_or_default() {
            "compare" => {
                let map = |p: &str| {
                    let p = PathBuf::from(p);
                    match p.strip_prefix(&out_abs) {
                        Ok(rel) => scratch.path().join(rel),
                        Err(_) => p,
                    }
                };
                let (a, b) = (map(words.next().unwrap_or_default()), map(words.next().unwrap_or_default()));
                commands::compare_files(&ctx, &a, &b)?;
            }
            label => {
                if label == "estimate" && config.estimate.dataset.is_none() {
                    let dst = scratch.path().join(commands::DATASET);
                    let src = out.join(commands::DATASET);
                    if !dst.exists() && src.exists() {
                        std::fs::copy(&src, &dst)?;
                    }
                }
                match run_command(&ctx, label) {
                    Ok(_) | Err(CliError::Numeric(_)) => {}
                    Err(err) => return Err(err),
                }
            }
        }
    }
    entries
        .iter()
        .map(|e| {
            let fresh = scratch.path().join(&e.path);
            if !fresh.exists() {
                return Ok(CheckLine {
                    path: e.path.clone(),
                    ok: false,
                    detail: "not produced on replay".into(),
                });
            }
            let h = manifest::hash_file(&fresh)?;
            let on_disk = out.join(&e.path);
            let disk_ok = on_disk.exists() && manifest::hash_file(&on_disk)? == e.sha256;
            let ok = h == e.sha256 && disk_ok;
            let detail = match (h == e.sha256, disk_ok) {
                (true, true) => "ok".into(),
                (false, _) => format!("replay hash {h} differs from manifest"),
                (true, false) => "file on disk differs from manifest".into(),
            };
            Ok(CheckLine {
                path: e.path.clone(),
                ok,
                detail,
            })
        })
        .collect()
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    // the global pool can only be configured once per process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    let label = command_label(&cli.command);
    match &cli.command {
        Command::Compare { a, b } => {
            let cfg = match &cli.config {
                Some(_) => load_config(cli)?,
                None => RunConfig::new(config::StateSpec::vacuum()),
            };
            let ctx = Context {
                out: output_dir(cli, Some(&cfg)),
                config: cfg,
                kernel_cache: cli.kernel_cache.clone(),
            };
            std::fs::create_dir_all(&ctx.out)?;
            let (a, b) = (absolute(a)?, absolute(b)?);
            let ((files, _), text) = commands::compare_files(&ctx, &a, &b)?;
            print!("{text}");
            let command = format!("compare\t{}\t{}", a.display(), b.display());
            manifest::record(&ctx.out, &command, &files)
        }
        Command::Check => {
            let out = output_dir(cli, None);
            let lines = check(&out, cli.kernel_cache.clone())?;
            let mut bad = 0;
            for l in &lines {
                println!("{} {} {}", if l.ok { "ok      " } else { "MISMATCH" }, l.path, l.detail);
                bad += usize::from(!l.ok);
            }
            if bad > 0 {
                return Err(CliError::Io(format!("{bad} of {} files failed the hash check", lines.len())));
            }
            Ok(())
        }
        _ => {
            let cfg = load_config(cli)?;
            let ctx = Context {
                out: output_dir(cli, Some(&cfg)),
                config: cfg,
                kernel_cache: cli.kernel_cache.clone(),
            };
            let files = run_command(&ctx, label)?;
            for f in files {
                println!("{}", ctx.out.join(f).display());
            }
            Ok(())
        }
    }
}
