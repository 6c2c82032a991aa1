//! Command-line runner for reflection tomography experiments.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "refltomo", version, about = "Frequency-domain reflection tomography experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides `noise.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the forward and adjoint solves.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `solver.gmres_tol`.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate scattered data for the configured scene.
    Synthesize,
    /// Reconstruct the contrast from data.
    Invert {
        /// Data file (`.bin` or `.csv`); defaults to `<out>/data.bin`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Reference image for the SNR; defaults to `<out>/truth.csv` if present.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Misfit curves over the contrast of a cylinder.
    DemoLandscape,
    /// Spatial spectra of linearized reconstructions in transmission and reflection.
    DemoSpectrum,
    /// DR and SNR of an image.
    Metrics {
        /// Image CSV; defaults to `<out>/image.csv`.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

pub struct Context {
    pub cfg: ExperimentConfig,
    /// Exact configuration text, hashed into manifests.
    pub cfg_text: String,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

fn setup(global: GlobalArgs) -> Result<Context, CliError> {
    let (mut cfg, cfg_text) = match &global.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => (ExperimentConfig::default(), String::new()),
    };
    if let Some(seed) = global.seed {
        cfg.noise.seed = seed;
    }
    if let Some(tol) = global.tol {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::Config(format!("--tol must lie in (0, 1), got {tol}")));
        }
        cfg.solver.gmres_tol = tol;
    }
    cfg.validate()?;
    if let Some(n) = global.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    std::fs::create_dir_all(&global.out).map_err(|e| CliError::io(&global.out, e))?;
    Ok(Context {
        cfg,
        cfg_text,
        out: global.out,
        threads: global.threads,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = setup(cli.global)?;
    match cli.command {
        Command::Synthesize => commands::synthesize(&ctx),
        Command::Invert { data, truth } => commands::invert(&ctx, data, truth),
        Command::DemoLandscape => commands::demo_landscape(&ctx),
        Command::DemoSpectrum => commands::demo_spectrum(&ctx),
        Command::Metrics { image, data, truth } => commands::metrics(&ctx, image, data, truth),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
