//! `platelat`: experiment driver for the hard-plate model.

mod analyze;
mod config;
mod fit;
mod output;
mod polymer;
mod simulate;
mod virial;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use output::Failure;

#[derive(Parser)]
#[command(name = "platelat", version, about = "Hard-plate Monte Carlo, contour analysis and expansions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the grand-canonical sampler and the configured analyses.
    Simulate(Common),
    /// Excluded volumes, scaling classes and Mayer-series cross-checks.
    Virial(Common),
    /// Contour extraction and invariant checks on snapshot files.
    Contours {
        #[command(flatten)]
        common: Common,
        /// Snapshot JSONL files.
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
    },
    /// Pebble classification of mixed blocks in snapshot files.
    Pebbles {
        #[command(flatten)]
        common: Common,
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
    },
    /// Cluster expansion against exact sums on random polymer models.
    PolymerCheck(Common),
    /// Exponential fit of a correlation CSV (columns r, value, error and
    /// optionally o1, o2).
    FitDecay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(common: &Common, required: bool) -> Result<Option<RunConfig>, Failure> {
    let Some(path) = &common.config else {
        if required {
            return Err(Failure::Config("--config is required for this subcommand".into()));
        }
        return Ok(None);
    };
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    Ok(Some(cfg))
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load_config(&c, true)?.unwrap();
            simulate::run(&cfg, &c.out)
        }
        Command::Virial(c) => {
            let cfg = load_config(&c, true)?.unwrap();
            virial::run(&cfg, &c.out)
        }
        Command::Contours { common, input } => {
            let cfg = load_config(&common, false)?;
            analyze::contours(cfg.as_ref(), &input, &common.out)
        }
        Command::Pebbles { common, input } => {
            let cfg = load_config(&common, false)?;
            analyze::pebbles(cfg.as_ref(), &input, &common.out)
        }
        Command::PolymerCheck(c) => {
            let cfg = load_config(&c, true)?.unwrap();
            polymer::run(&cfg, &c.out)
        }
        Command::FitDecay { common, input } => {
            load_config(&common, false)?;
            fit::run(&input, &common.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("platelat: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
