//! `sginit`: synthetic data generation, dense bundle adjustment runs,
//! evaluation and initialization ablations.

mod commands;
mod config;
mod dataset;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sginit_core::priors::ScaleMode;
use sginit_core::{AlignmentMode, Error, Result};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "sginit", version, about = "Geometry-guided initialization for dense bundle adjustment")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Init mode for `run`, alignment for `eval-traj`, scaling for `eval-depth`.
    #[arg(long, global = true, value_name = "M")]
    mode: Option<String>,

    /// Overrides the `seed` key.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset.
    Synth,
    /// Optimize a dataset from its priors.
    Run {
        dataset: PathBuf,
    },
    /// ATE and failure statistics of a TUM trajectory against ground truth.
    EvalTraj {
        est: PathBuf,
        gt: PathBuf,
    },
    /// Depth metrics over matching `%06d.pfm` files.
    EvalDepth {
        est: PathBuf,
        gt: PathBuf,
        /// Ground truth beyond this depth (meters) is ignored.
        #[arg(long, default_value_t = 80.0)]
        cap: f64,
    },
    /// Naive vs geometry-guided initialization over a scenario sweep.
    AblateInit,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Singular { .. }
        | Error::DegenerateFit(_)
        | Error::DegenerateAlignment(_)
        | Error::Coverage(..)
        | Error::NoValidPixels => 4,
        Error::NoOverlap(_) | Error::Association(_) => 5,
        _ => 2,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("SGINIT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("SGINIT_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))
}

fn require_out(out: Option<&Path>) -> Result<&Path> {
    out.ok_or_else(|| Error::Config("--out DIR is required".into()))
}

fn no_mode(mode: Option<&str>, command: &str) -> Result<()> {
    match mode {
        Some(m) => Err(Error::Config(format!("--mode {m} has no meaning for {command}"))),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let mut cfg = RunConfig::resolve(cli.config.as_deref(), cli.seed)?;
    let out = cli.out.as_deref();
    let mode = cli.mode.as_deref();
    match &cli.command {
        Command::Synth => {
            no_mode(mode, "synth")?;
            commands::cmd_synth(&cfg, require_out(out)?)
        }
        Command::Run { dataset } => {
            if let Some(m) = mode {
                cfg.init.mode = m.parse()?;
            }
            commands::cmd_run(&cfg, dataset, require_out(out)?)
        }
        Command::EvalTraj { est, gt } => {
            let alignment: AlignmentMode = match mode {
                Some(m) => m.parse()?,
                None => cfg.alignment,
            };
            commands::cmd_eval_traj(&cfg, est, gt, alignment)
        }
        Command::EvalDepth { est, gt, cap } => {
            let scaling: ScaleMode = mode.unwrap_or("median").parse()?;
            commands::cmd_eval_depth(est, gt, *cap, scaling)
        }
        Command::AblateInit => {
            no_mode(mode, "ablate-init")?;
            commands::cmd_ablate_init(&cfg, require_out(out)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sginit: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
