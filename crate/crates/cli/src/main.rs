//! `fedshift` experiment driver.
//!
//! Exit codes: 0 success, 1 a check failed (or the run hit a numerical
//! error), 2 the configuration or arguments are invalid.

mod commands;
mod config;
mod summary;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{Outcome, RidgeArgs};
use config::{ConfigError, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "fedshift", version, about = "Importance-weighted federated learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replace the configured seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct WithConfig {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Federated training for every configured mode and seed.
    Train(WithConfig),
    /// Fit per-client ratio models and sweep the supremum estimate.
    RatioFit(WithConfig),
    /// Exact ridge-regression checks.
    RidgeVerify {
        #[command(flatten)]
        common: Common,
        /// One-hot instances per condition sweep.
        #[arg(long, default_value_t = 10_000)]
        instances: usize,
        /// Fixed-design instances for the Monte Carlo identity.
        #[arg(long, default_value_t = 20)]
        mc_instances: usize,
        /// Noise draws per fixed-design instance.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Excess-risk sweep over sample sizes.
    Consistency(WithConfig),
    /// Train/test second-moment eigenvalue report.
    EigenReport(WithConfig),
}

fn load(args: &WithConfig) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.common.seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn init_threads(common: &Common) -> Result<()> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(config::config_error("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Outcome> {
    let with = |args: &WithConfig, f: fn(&ExperimentConfig, &Path) -> Result<Outcome>| -> Result<Outcome> {
        init_threads(&args.common)?;
        f(&load(args)?, &args.common.out)
    };
    match &cli.command {
        Command::Train(a) => with(a, commands::cmd_train),
        Command::RatioFit(a) => with(a, commands::cmd_ratio_fit),
        Command::Consistency(a) => with(a, commands::cmd_consistency),
        Command::EigenReport(a) => with(a, commands::cmd_eigen_report),
        Command::RidgeVerify { common, instances, mc_instances, trials } => {
            init_threads(common)?;
            let args = RidgeArgs {
                instances: *instances,
                mc_instances: *mc_instances,
                trials: *trials,
                seed: common.seed.unwrap_or(0),
            };
            commands::cmd_ridge_verify(&args, &common.out)
        }
    }
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ConfigError>()
            || matches!(
                c.downcast_ref::<fedshift::Error>(),
                Some(fedshift::Error::Configuration(_) | fedshift::Error::InvalidArgument(_))
            )
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_config_error(&e) { 2 } else { 1 })
        }
    }
}
