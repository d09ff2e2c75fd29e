//! Command-line driver: `sublime profile|sample|curve|winrate|redundancy`.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, ExitCode};

#[derive(Debug, Parser)]
#[command(name = "sublime", version, about = "Benchmark subsampling and fidelity analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; outputs do not depend on this.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Chat-completions base URL for the review stage.
    #[arg(long)]
    pub review_url: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-sample quality and readability metrics.
    Profile(Common),
    /// Subset plans for every method, rate and seed.
    Sample(Common),
    /// Fidelity curves and adaptive method selection.
    Curve {
        #[command(flatten)]
        common: Common,
        /// Also write cross-benchmark win-rate outputs.
        #[arg(long)]
        winrate: bool,
    },
    /// Cross-benchmark win-rate ranking and its fidelity per method.
    Winrate(Common),
    /// Redundant-pair funnel across benchmarks.
    Redundancy {
        #[command(flatten)]
        common: Common,
        /// Also compare sampling with and without redundancy filtering.
        #[arg(long)]
        mr: bool,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Self::Profile(c) | Self::Sample(c) | Self::Winrate(c) => c,
            Self::Curve { common, .. } | Self::Redundancy { common, .. } => common,
        }
    }
}

/// Loads the config, applies overrides and runs the command on a pool of
/// `--jobs` threads.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let common = cli.command.common();
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(url) = &common.review_url {
        cfg.redundancy.review_url = Some(url.clone());
    }
    cfg.validate()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| CliError::new(ExitCode::Other, e))?;
    pool.install(|| match &cli.command {
        Command::Profile(_) => commands::cmd_profile(&cfg),
        Command::Sample(_) => commands::cmd_sample(&cfg),
        Command::Curve { winrate, .. } => commands::cmd_curve(&cfg, *winrate),
        Command::Winrate(_) => commands::cmd_winrate(&cfg),
        Command::Redundancy { mr, .. } => commands::cmd_redundancy(&cfg, *mr, common.review_url.as_deref()),
    })
}
