mod commands;
mod config;
mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use output::Format;

/// Quantum frequency conversion design and analysis tools.
#[derive(Parser)]
#[command(name = "qfc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, default_value = "qfc-out")]
    out_dir: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Phase mismatches, poling period and phase-matching temperature.
    Phasematch(Common),
    /// Conversion efficiency against total pump power.
    Efficiency {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        min_w: Option<f64>,
        #[arg(long)]
        max_w: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Include waveguide propagation loss.
        #[arg(long)]
        loss: bool,
        /// Include the wrong-pump processes.
        #[arg(long)]
        wrong_pump: bool,
    },
    /// Pump pair and powers for a channel-to-channel conversion.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Target efficiency below the maximum (lower-power solution).
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Linear fit of noise counts against total pump power.
    NoiseFit(Common),
    /// HOM dip scan and visibilities.
    Hom {
        #[command(flatten)]
        common: Common,
        /// Run the seeded Poisson Monte Carlo.
        #[arg(long)]
        monte_carlo: bool,
    },
    /// Re-runs the command recorded in an output file's header.
    Replay {
        file: PathBuf,
        #[arg(long, default_value = "qfc-out")]
        out_dir: PathBuf,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(name: &str, cfg: &RunConfig, format: Format, out_dir: &std::path::Path) -> Result<()> {
    let artifacts = commands::run(name, cfg)?;
    let written = output::write(&artifacts, cfg, format, out_dir)?;
    for line in &artifacts.summary {
        println!("{line}");
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Phasematch(common) => execute("phasematch", &load(&common)?, common.format, &common.out_dir),
        Command::Efficiency {
            common,
            min_w,
            max_w,
            points,
            loss,
            wrong_pump,
        } => {
            let mut cfg = load(&common)?;
            let s = &mut cfg.sweep;
            s.min_w = min_w.unwrap_or(s.min_w);
            s.max_w = max_w.unwrap_or(s.max_w);
            s.points = points.unwrap_or(s.points);
            s.include_loss |= loss;
            s.include_wrong_pump |= wrong_pump;
            execute("efficiency", &cfg, common.format, &common.out_dir)
        }
        Command::Plan { common, eta } => {
            let mut cfg = load(&common)?;
            if eta.is_some() {
                cfg.plan.requested_eta = eta;
            }
            execute("plan", &cfg, common.format, &common.out_dir)
        }
        Command::NoiseFit(common) => execute("noise-fit", &load(&common)?, common.format, &common.out_dir),
        Command::Hom { common, monte_carlo } => {
            let mut cfg = load(&common)?;
            cfg.hom.monte_carlo.enabled |= monte_carlo;
            execute("hom", &cfg, common.format, &common.out_dir)
        }
        Command::Replay { file, out_dir } => {
            let (name, cfg, format) = output::read_provenance(&file)?;
            execute(&name, &cfg, format, &out_dir)
        }
    }
}

fn main() -> std::process::ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
