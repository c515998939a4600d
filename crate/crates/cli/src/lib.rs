//! The `pushfit` command-line pipeline: simulate, preprocess, classify,
//! segment, fit, summarise and plot push-recovery trials.
//!
//! Every command reads a resolved [`RunConfig`]: defaults, then the TOML file
//! given with `--config`, then command-line flags.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod prepare;
pub mod svg;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use pushfit::fitlaw::Metric;

pub use commands::Outcome;
pub use config::{Overrides, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "pushfit",
    version,
    about = "Identify control laws of human push recovery"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Keep abandoned trials in fits and statistics.
    #[arg(long, global = true)]
    pub include_abandoned: bool,
    /// Ridge penalty.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Laws to fit, e.g. `P,PD,PID`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub law: Vec<String>,
    /// Error metric applied to every law given with `--law`.
    #[arg(long, global = true)]
    pub metric: Option<Metric>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Trial directory; defaults to `<out_dir>/trials`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ArtifactArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Fit report; defaults to `<out_dir>/fit_report.json`.
    #[arg(long)]
    pub fits: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate archetype trials with ground truth.
    Simulate {
        /// A strategy tag or `all`.
        #[arg(long)]
        strategy: Option<String>,
        /// Trials per strategy.
        #[arg(long)]
        n: Option<usize>,
        /// Integration step in seconds.
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Trim, derive kinematics and shift the origin.
    Preprocess(InputArgs),
    /// Classify each trial's strategy from its trajectory.
    Classify(InputArgs),
    /// Split each trial into strategy phases.
    Segment(InputArgs),
    /// Fit every configured law to whole trials.
    Fit(InputArgs),
    /// Fit every configured law per phase.
    SegmentFit(InputArgs),
    /// Group gain statistics and strategy-selection statistics.
    Stats(ArtifactArgs),
    /// Phase-plane and initial-state plots.
    Plot(ArtifactArgs),
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            include_abandoned: self.include_abandoned,
            lambda: self.lambda,
            laws: self.law.clone(),
            metric: self.metric,
            workers: self.workers,
        }
    }
}

/// Resolves the configuration of `cli` and validates it.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(&cli.global.overrides());
    if let Command::Simulate { strategy, n, dt } = &cli.command {
        commands::SimulateOptions {
            strategy: strategy.clone(),
            n: *n,
            dt: *dt,
        }
        .apply(&mut cfg);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = resolve(cli)?;
    match &cli.command {
        Command::Simulate { .. } => commands::cmd_simulate(&cfg),
        Command::Preprocess(a) => {
            commands::cmd_preprocess(&cfg, &cfg.input_dir(a.input.as_deref()))
        }
        Command::Classify(a) => commands::cmd_classify(&cfg, &cfg.input_dir(a.input.as_deref())),
        Command::Segment(a) => commands::cmd_segment(&cfg, &cfg.input_dir(a.input.as_deref())),
        Command::Fit(a) => commands::cmd_fit(&cfg, &cfg.input_dir(a.input.as_deref())),
        Command::SegmentFit(a) => {
            commands::cmd_segment_fit(&cfg, &cfg.input_dir(a.input.as_deref()))
        }
        Command::Stats(a) => commands::cmd_stats(
            &cfg,
            &cfg.input_dir(a.input.input.as_deref()),
            a.fits.as_deref(),
        ),
        Command::Plot(a) => commands::cmd_plot(
            &cfg,
            &cfg.input_dir(a.input.input.as_deref()),
            a.fits.as_deref(),
        ),
    }
}
