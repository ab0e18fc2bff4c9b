//! The `sdfit` command line: reconstruction, SDF probing, shape-space
//! training and inference, and verification of the linear theory.

pub mod analytic;
pub mod commands;
pub mod config;
pub mod output;
pub mod theory_verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, config, or input files.
    #[error("{0}")]
    Usage(String),
    /// Training or evaluation produced non-finite values.
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<sdfit_core::Error> for CliError {
    fn from(e: sdfit_core::Error) -> Self {
        match e {
            sdfit_core::Error::NonFinite { .. } => CliError::Numeric(format!("{e} (try a smaller learning rate)")),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sdfit",
    version,
    about = "Fit neural signed distance functions to point clouds"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random stream; overrides the config.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Iteration budget (epochs for shape-space); overrides the config.
    #[arg(long, global = true, value_name = "N")]
    pub iters: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one point cloud and extract its zero level set.
    Reconstruct {
        /// Point-cloud file.
        input: Option<PathBuf>,
    },
    /// Fit an analytic shape from fresh samples and report the relative SDF error.
    SdfProbe {
        /// plane or sphere.
        shape: Option<String>,
    },
    /// Train one network and a latent code per shape.
    ShapeSpace {
        /// Point-cloud files, one per shape.
        inputs: Vec<PathBuf>,
    },
    /// Fit a latent code to a new cloud with the network frozen.
    Infer {
        /// Point-cloud file.
        input: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Row label in the written latent table.
        #[arg(long)]
        id: Option<String>,
    },
    /// Extract the shape of a weighted average of latent codes.
    Interpolate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Latent table CSV.
        #[arg(long)]
        latents: Option<PathBuf>,
        /// Shape ids, comma-separated.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<String>,
        /// Weights, comma-separated, summing to 1.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
    },
    /// Check critical points, saddle avoidance and the Liapunov certificate
    /// of the linear model.
    TheoryVerify,
}

/// Resolves the config, then runs the command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed.or(cfg.seed) {
        cfg.apply_seed(seed);
    }
    if let Some(n) = cli.iters {
        cfg.reconstruct.schedule.iters = n;
        cfg.sdf_probe.schedule.iters = n;
        cfg.shape_space.schedule.epochs = n;
        cfg.infer.schedule.iters = n;
        cfg.theory.max_iters = n;
    }
    match cli.command {
        Command::Reconstruct { ref input } => {
            cfg.reconstruct.input = input.clone().or(cfg.reconstruct.input);
        }
        Command::SdfProbe { ref shape } => {
            if shape.is_some() {
                cfg.sdf_probe.shape = shape.clone();
            }
        }
        Command::ShapeSpace { ref inputs } => {
            if !inputs.is_empty() {
                cfg.shape_space.inputs = inputs.clone();
            }
        }
        Command::Infer {
            ref input,
            ref checkpoint,
            ref id,
        } => {
            cfg.infer.input = input.clone().or(cfg.infer.input);
            cfg.infer.checkpoint = checkpoint.clone().or(cfg.infer.checkpoint);
            cfg.infer.id = id.clone().or(cfg.infer.id);
        }
        Command::Interpolate {
            ref checkpoint,
            ref latents,
            ref ids,
            ref weights,
        } => {
            let ip = &mut cfg.interpolate;
            ip.checkpoint = checkpoint.clone().or(ip.checkpoint.take());
            ip.latents = latents.clone().or(ip.latents.take());
            if !ids.is_empty() {
                ip.ids = ids.clone();
            }
            if !weights.is_empty() {
                ip.weights = weights.clone();
            }
        }
        Command::TheoryVerify => {}
    }
    cfg.validate()?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // Fails only if a pool already exists in this process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Reconstruct { .. } => commands::reconstruct(&cfg, &cli.out),
        Command::SdfProbe { .. } => commands::sdf_probe(&cfg, &cli.out),
        Command::ShapeSpace { .. } => commands::shape_space(&cfg, &cli.out),
        Command::Infer { .. } => commands::infer(&cfg, &cli.out),
        Command::Interpolate { .. } => commands::interpolate(&cfg, &cli.out),
        Command::TheoryVerify => theory_verify::run(&cfg, &cli.out),
    }
}
