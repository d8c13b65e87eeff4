//! `obscma`: ABER sweeps and union bounds for OTFS-SCMA uplink with two RRHs.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use otfs_scma::channel::Scheme;
use otfs_scma::simulator::{run_bound, run_sweep, SimulationConfig};

#[derive(Parser)]
#[command(name = "obscma", version, about = "OTFS-SCMA uplink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo ABER sweep.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// coMP, colocated or cellular.
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// Single-user ABER union bound over the configured power sweep.
    Bound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<SimulationConfig> {
    SimulationConfig::load(path).with_context(|| format!("reading config {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out, seed, trials, scheme } => {
            let mut cfg = load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(trials) = trials {
                cfg.trials = trials;
            }
            if let Some(scheme) = scheme {
                cfg.scheme = scheme;
            }
            let report = run_sweep(&cfg)?;
            report.save(&out).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Bound { config, out } => {
            let report = run_bound(&load(&config)?)?;
            report.save(&out).with_context(|| format!("writing {}", out.display()))?;
        }
    }
    Ok(())
}
