use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pairspec::cli;

/// Joint-spectrum simulation and analysis of polarization-correlated photon
/// pairs: synthetic coincidence maps, model fits, visibility and entropy
/// maps, and virtual spectral filtering.
#[derive(Parser)]
#[command(name = "pairspec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write rate and Poisson count maps for each configured analyzer setting.
    Simulate {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the joint-spectrum model to a map file and write a fit report.
    Fit {
        /// Map CSV (with its .meta.json sidecar) to fit.
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write visibility, maximum-angle, and entropy maps.
    Maps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Scan filter bandwidths: write the tradeoff curve and the optimum.
    Vfilter {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run() -> pairspec::Result<()> {
    match Cli::parse().command {
        Command::Simulate { config, out, seed } => {
            cli::cmd_simulate(&cli::load_config(&config)?, &out, seed)
        }
        Command::Fit { map, out } => cli::cmd_fit(&map, &out),
        Command::Maps { config, out, seed } => {
            cli::cmd_maps(&cli::load_config(&config)?, &out, seed)
        }
        Command::Vfilter { config, out, seed } => {
            cli::cmd_vfilter(&cli::load_config(&config)?, &out, seed)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
