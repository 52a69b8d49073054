//! `molt`: featurize molecules, train property models, and run transfer-learning experiments.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Context, ModelKind};
use config::ExperimentConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "molt",
    version,
    about = "Molecular property models and transfer-learning experiments"
)]
struct Cli {
    /// Maximum number of seeds or sweep points run at once [default: all cores]
    #[arg(long, global = true, env = "MOLT_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (TOML)
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory, overriding `output_dir` in the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed, overriding `seed` in the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunFlags {
    /// Overrides `train.max_epochs`
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Overrides `n_runs` (number of seeds)
    #[arg(long)]
    n_runs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute descriptor rows (SOAP, SOAP+SD or PCA-compressed SOAP) into descriptors.csv
    Featurize {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model family; writes summary.csv, per-seed traces and model.mltc
    Train {
        #[command(flatten)]
        common: Common,
        /// Model family
        #[arg(long, value_enum)]
        model: ModelKind,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Pre-train PaiNN on a cheaply labeled corpus and keep the best of several seeds
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Overrides `pretrain.epochs`
        #[arg(long)]
        epochs: Option<usize>,
        /// Overrides `pretrain.n_seeds`
        #[arg(long)]
        n_seeds: Option<usize>,
    },
    /// Fine-tune a pre-trained checkpoint on the target data
    Finetune {
        #[command(flatten)]
        common: Common,
        /// Pre-trained checkpoint, overriding `finetune.checkpoint`
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Use layer-wise learning rates (each earlier block gets lr / factor)
        #[arg(long)]
        discriminative: bool,
        /// Overrides `finetune.factor`
        #[arg(long)]
        factor: Option<f64>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Sweep the training-set size and write curve.csv (and curve.svg with --plot)
    Curve {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sizes, overriding `curve.sizes`
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Also draw the curve as an SVG
        #[arg(long)]
        plot: bool,
        /// Pre-trained checkpoint for the finetune arm
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Fit reference = a * cheap + b by least squares and report the fit MAE
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Cheap-label CSV, overriding `calibrate.cheap_labels`
        #[arg(long)]
        cheap_labels: Option<PathBuf>,
    },
    /// Keep structures without forbidden elements that contain every required element
    Filter {
        #[command(flatten)]
        common: Common,
        /// Comma-separated element symbols to exclude, overriding `filter.forbidden`
        #[arg(long)]
        forbidden: Option<String>,
        /// Comma-separated element symbols that must be present, overriding `filter.required`
        #[arg(long)]
        required: Option<String>,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Featurize { common }
            | Command::Train { common, .. }
            | Command::Pretrain { common, .. }
            | Command::Finetune { common, .. }
            | Command::Curve { common, .. }
            | Command::Calibrate { common, .. }
            | Command::Filter { common, .. } => common,
        }
    }
}

fn apply_run_flags(cfg: &mut ExperimentConfig, run: &RunFlags) {
    if let Some(e) = run.max_epochs {
        cfg.train.max_epochs = e;
    }
    if let Some(n) = run.n_runs {
        cfg.n_runs = n;
    }
}

fn configure(cli: &Cli) -> Result<Context, CliError> {
    let common = cli.command.common();
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Train { run, .. } => apply_run_flags(&mut cfg, run),
        Command::Pretrain {
            epochs, n_seeds, ..
        } => {
            let p = cfg
                .pretrain
                .as_mut()
                .ok_or_else(|| CliError::Config("missing [pretrain] section".into()))?;
            if let Some(e) = epochs {
                p.epochs = *e;
            }
            if let Some(n) = n_seeds {
                p.n_seeds = *n;
            }
        }
        Command::Finetune {
            discriminative,
            factor,
            run,
            ..
        } => {
            apply_run_flags(&mut cfg, run);
            let f = cfg.finetune.get_or_insert(config::FinetuneSection {
                checkpoint: None,
                discriminative: false,
                factor: molt_core::transfer::DEFAULT_FACTOR,
            });
            f.discriminative |= *discriminative;
            if let Some(x) = factor {
                f.factor = *x;
            }
        }
        Command::Curve { sizes, run, .. } => {
            apply_run_flags(&mut cfg, run);
            if let Some(s) = sizes {
                let c = cfg
                    .curve
                    .as_mut()
                    .ok_or_else(|| CliError::Config("missing [curve] section".into()))?;
                c.sizes = s.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    if cli.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    Ok(Context {
        cfg,
        jobs: cli.jobs,
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = configure(cli)?;
    match &cli.command {
        Command::Featurize { .. } => commands::featurize_cmd(&ctx),
        Command::Train { model, .. } => commands::train_cmd(&ctx, *model),
        Command::Pretrain { .. } => commands::pretrain_cmd(&ctx),
        Command::Finetune { checkpoint, .. } => commands::finetune_cmd(&ctx, checkpoint.as_deref()),
        Command::Curve {
            plot, checkpoint, ..
        } => commands::curve_cmd(&ctx, *plot, checkpoint.as_deref()),
        Command::Calibrate { cheap_labels, .. } => {
            commands::calibrate_cmd(&ctx, cheap_labels.as_deref())
        }
        Command::Filter {
            forbidden,
            required,
            ..
        } => commands::filter_cmd(&ctx, forbidden.as_deref(), required.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("molt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
