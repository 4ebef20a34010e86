//! `ccbs`: simulate device unitaries, sample multi-photon outputs,
//! reconstruct and validate, and tabulate Haar statistics and footprints.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use ccbs_core::validation::TestKind;
use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;
use output::OutDir;

#[derive(Parser)]
#[command(name = "ccbs", version, about = "Continuously-coupled waveguide boson sampling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults describe the reference device.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Number of sampled events, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    events: Option<usize>,
    /// Validation test, overriding the config.
    #[arg(long, global = true, value_parser = ["uniform", "distinguishable"])]
    test: Option<String>,
    /// Wrong-unitary ensemble size, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    ensemble: Option<usize>,
    /// Restrict sampling to collision-free patterns.
    #[arg(long, global = true, value_name = "BOOL")]
    collision_free: Option<bool>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Propagate the configured device and write its unitary.
    Simulate,
    /// Draw output events from the configured source.
    Sample,
    /// Reconstruct the input rows of the circuit from simulated HOM data.
    Reconstruct,
    /// Score a sample stream and compare against Haar-random circuits.
    Validate,
    /// Device-ensemble and Haar histograms of moduli, phases and similarities.
    Haar,
    /// Interferometer length table and scaling slopes.
    Footprint,
}

impl Cli {
    fn effective_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.events {
            cfg.events = n;
        }
        if let Some(t) = &self.test {
            cfg.validation.test = t.parse::<TestKind>()?;
        }
        if let Some(n) = self.ensemble {
            cfg.validation.ensemble = n;
        }
        if let Some(b) = self.collision_free {
            cfg.collision_free = b;
        }
        Ok(cfg)
    }

    fn run(&self) -> Result<Vec<PathBuf>, CliError> {
        let cfg = self.effective_config()?;
        let out = OutDir::create(&self.out)?;
        match self.command {
            Command::Simulate => commands::simulate(&cfg, &out),
            Command::Sample => commands::sample_cmd(&cfg, &out),
            Command::Reconstruct => commands::reconstruct_cmd(&cfg, &out),
            Command::Validate => commands::validate(&cfg, &out),
            Command::Haar => commands::haar(&cfg, &out),
            Command::Footprint => commands::footprint(&cfg, &out),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.run() {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
