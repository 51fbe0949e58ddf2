//! Command-line front end: configuration ingestion, figure sweeps as CSV,
//! decoherence budgets and protocol runs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{Mode, RunConfig};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "levsqueeze", version, about = "Squeezing protocol simulations for a levitated nanoparticle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Configuration file; the bundled `table1` reference preset when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base RNG seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output path; CSV goes to stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// `deterministic` or `stochastic`, overriding the configuration.
    #[arg(long, global = true)]
    pub mode: Option<String>,

    /// Number of stochastic trajectories (seeds seed, seed+1, ...).
    #[arg(long, global = true)]
    pub ensemble: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Decoherence rate table.
    Budget,
    /// Squeezing versus Gamma/omega per cycle count.
    SweepDecoherence,
    /// Squeezing and momentum width versus omega'/omega per axis.
    SweepFrequency,
    /// omega_perp/omega_z versus numerical aperture.
    SweepNa,
    /// One protocol run: trajectory and sensing summary.
    Run,
}

impl Cli {
    /// Configuration with command-line overrides applied.
    pub fn resolve_config(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(m) = &self.mode {
            cfg.mode = Mode::parse(m)?;
        }
        if let Some(n) = self.ensemble {
            cfg.ensemble = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let cfg = cli.resolve_config()?;
    let out = match cli.command {
        Command::Budget => commands::budget(&cfg)?,
        Command::SweepDecoherence => commands::sweep_decoherence(&cfg)?,
        Command::SweepFrequency => commands::sweep_frequency(&cfg)?,
        Command::SweepNa => commands::sweep_na(&cfg)?,
        Command::Run => commands::run(&cfg)?,
    };
    output::write_all(&out.files)?;
    print!("{}", out.stdout);
    for (p, _) in &out.files {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}
