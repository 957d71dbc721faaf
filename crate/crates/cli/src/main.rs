//! `icdisp`: second-order analysis of the Gaussian interference channel.
//!
//! Exit codes: 0 success, 1 verification failure, 2 bad configuration,
//! 3 runtime precondition (unsupported regime or case, too few trials,
//! unwritable output).

mod commands;
mod config;
mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::config::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "icdisp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Regime, first- and second-order constants of a channel (analyze.json).
    Analyze(Common),
    /// Second-order region at the target point (region.csv, region.svg, region.json).
    Region(Common),
    /// Monte-Carlo achievability and converse bounds (simulate.csv).
    Simulate(Common),
    /// Numerical verification suite (verify.json).
    Verify(Common),
}

#[derive(clap::Args, Debug)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; 0 or unset uses all cores.
    #[arg(long, env = "ICDISP_THREADS")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Marker for a failed verification run.
#[derive(Debug)]
pub struct VerificationFailed(pub Vec<String>);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "verification failed: {}", self.0.join(", "))
    }
}

impl std::error::Error for VerificationFailed {}

type CommandFn = fn(&config::RunConfig, &Path) -> anyhow::Result<()>;

fn run(cli: Cli) -> anyhow::Result<()> {
    let (common, cmd): (_, CommandFn) = match &cli.command {
        Command::Analyze(c) => (c, commands::analyze),
        Command::Region(c) => (c, commands::region),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Verify(c) => (c, verify::run),
    };
    let mut cfg = config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = common.threads.filter(|&t| t > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("building thread pool")?;
    }
    std::fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    cmd(&cfg, &common.out)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<VerificationFailed>().is_some() {
        1
    } else if e.downcast_ref::<ConfigError>().is_some() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icdisp: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
