mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Evidential classifiers with Fisher-information-weighted objectives.
#[derive(Debug, Parser)]
#[command(name = "iedl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model per seed; writes checkpoints and per-epoch loss logs.
    Train(RunArgs),
    /// Evaluate trained checkpoints on the configured tasks.
    Eval(RunArgs),
    /// Write per-sample uncertainty scores for ID and OOD sets.
    ExportDensity(RunArgs),
    /// Cross-check closed forms and gradients against independent oracles.
    OracleCheck(OracleArgs),
}

/// Settings shared by train, eval and export-density. Precedence is
/// flags, then the config file, then built-in defaults.
#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` config file (a run manifest works too).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Objective: edl, edl-logdet, imse or iedl.
    #[arg(long)]
    mode: Option<String>,
    /// Coefficient of the negative log-determinant term.
    #[arg(long)]
    lambda1: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    /// adam or sgd.
    #[arg(long)]
    optimizer: Option<String>,
    /// Early-stopping patience in epochs; 0 disables.
    #[arg(long)]
    patience: Option<String>,
    /// Single run seed (shorthand for --seeds N).
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<String>,
    /// Comma-separated run seeds.
    #[arg(long)]
    seeds: Option<String>,
    /// synthetic or idx.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    train_images: Option<String>,
    #[arg(long)]
    train_labels: Option<String>,
    #[arg(long)]
    test_images: Option<String>,
    #[arg(long)]
    test_labels: Option<String>,
    #[arg(long)]
    ood_images: Option<String>,
    /// Stratified training subset size; 0 keeps all.
    #[arg(long)]
    subset: Option<String>,
    /// Comma-separated tasks: confidence, ood, noisy.
    #[arg(long)]
    tasks: Option<String>,
    #[arg(long)]
    noise_sigma: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Where checkpoints are read from (defaults to --out).
    #[arg(long)]
    checkpoint_dir: Option<String>,
    /// Any config key, as KEY=VALUE. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        let flags = [
            ("mode", &self.mode),
            ("lambda1", &self.lambda1),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("lr", &self.lr),
            ("optimizer", &self.optimizer),
            ("patience", &self.patience),
            ("seeds", &self.seed),
            ("seeds", &self.seeds),
            ("dataset", &self.dataset),
            ("train_images", &self.train_images),
            ("train_labels", &self.train_labels),
            ("test_images", &self.test_images),
            ("test_labels", &self.test_labels),
            ("ood_images", &self.ood_images),
            ("subset", &self.subset),
            ("tasks", &self.tasks),
            ("noise_sigma", &self.noise_sigma),
            ("out", &self.out),
            ("checkpoint_dir", &self.checkpoint_dir),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ten times fewer Monte-Carlo draws.
    #[arg(long)]
    quick: bool,
    /// Output directory for the manifest and the check table.
    #[arg(long, default_value = "iedl-run")]
    out: PathBuf,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(args) => commands::cmd_train(&args.resolve()?),
        Command::Eval(args) => commands::cmd_eval(&args.resolve()?),
        Command::ExportDensity(args) => commands::cmd_export_density(&args.resolve()?),
        Command::OracleCheck(args) => commands::cmd_oracle_check(args.seed, args.quick, &args.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
