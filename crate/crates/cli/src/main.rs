mod config;
mod inspect;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "rems", version, about = "Switch-based hybrid beamforming array simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Quadrature grid spacing in degrees (overrides `grid_deg`).
    #[arg(long = "grid-deg", global = true)]
    grid_deg: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Gain maps of every benchmark plus the comparison table.
    GainMap { config: PathBuf },
    /// Switch-state search for the configured objective.
    Optimize { config: PathBuf },
    /// Summarize a Touchstone file, a pattern CSV or a config.
    Inspect {
        path: PathBuf,
        /// Frequency used to pick a Touchstone sample.
        #[arg(long, default_value_t = 12e9)]
        frequency_hz: f64,
    },
}

fn load(cli: &Cli, path: &Path) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(g) = cli.grid_deg {
        cfg.grid_deg = g;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let out = cfg.output_dir.clone();
    Ok((cfg, out))
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::GainMap { config } => {
            let (cfg, out) = load(cli, config)?;
            let rows = run::gain_map(&cfg, None, &out)?;
            for r in rows {
                println!(
                    "{:<26} chains {:>3}  median {:>8.3} dBi  relative {:>8.3} dB  CAM {:>8.3} dB",
                    r.name, r.rf_chains, r.median_gain_dbi, r.median_relative_db, r.cam_db
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Optimize { config } => {
            let (cfg, out) = load(cli, config)?;
            let report = run::optimize(&cfg, &out)?;
            println!(
                "{}: {:.4} dB with {} after {} evaluations",
                report.method, report.best_objective_db, report.best_config_hex, report.evaluations
            );
            println!("wrote {}", out.display());
        }
        Command::Inspect { path, frequency_hz } => {
            print!("{}", inspect::inspect(path, cli.grid_deg.unwrap_or(1.0), *frequency_hz)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(run::exit_code(&e))
        }
    }
}
