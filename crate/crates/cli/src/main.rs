//! Batch driver for the mask-guided pseudo-label pipeline.

mod commands;
mod config;
mod driver;
mod logging;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};
use maskalign::Manifest;

use commands::proto_loss::LossOptions;
use commands::prototypes::PrototypeOptions;
use commands::Outcome;
use config::{parse_subset, PipelineConfig};
use driver::Context;

#[derive(Parser)]
#[command(
    name = "maskalign",
    version,
    about = "Mask-guided pseudo-label refinement and prototype alignment"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON array of per-image input records.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// JSON pipeline configuration; flags below override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Recompute outputs even when they are newer than their inputs.
    #[arg(long, global = true)]
    force: bool,
    /// Confidence threshold for pseudo-labels
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Minimum top-1 minus top-2 margin for a reliable mask pixel
    #[arg(long, global = true)]
    tau_prime: Option<f64>,
    /// Softmax temperature of the prototype loss
    #[arg(long, global = true)]
    temperature: Option<f64>,
    /// Weight of the prototype loss in the total loss
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// EMA decay of the teacher
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Superpixel budget per image.
    #[arg(long, global = true)]
    superpixels: Option<usize>,
    /// Number of semantic classes.
    #[arg(long, global = true)]
    classes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Superpixels and point prompts per image.
    Prompts,
    /// Greedy overlap filtering, mask-ID maps and coverage.
    Filter,
    /// Mask-level pseudo-label refinement.
    Refine,
    /// Build the class prototype bank.
    Prototypes {
        /// Accept classes without any labeled pixel.
        #[arg(long)]
        allow_absent: bool,
        /// Single-pass summation in manifest order.
        #[arg(long)]
        strict_order: bool,
    },
    /// Prototype contrastive loss, optionally with gradients.
    ProtoLoss {
        /// Prototype tensor [default: <out>/prototypes.npy].
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Projection weight, shape (C_enc, C_proto); without a head, features are used as-is
        #[arg(long)]
        head_weight: Option<PathBuf>,
        /// Projection bias, shape (C_proto)
        #[arg(long)]
        head_bias: Option<PathBuf>,
        /// Write ∂L/∂z per image to <out>/proto_grad/.
        #[arg(long)]
        grad: bool,
        /// Drop absent classes from the softmax.
        #[arg(long)]
        exclude_absent: bool,
        /// Use raw dot products instead of cosine similarity.
        #[arg(long)]
        raw_dot: bool,
    },
    /// Exponential moving average of teacher and student tensors.
    Ema {
        #[arg(long)]
        teacher: PathBuf,
        #[arg(long)]
        student: PathBuf,
        /// Result path [default: <out>/teacher.npy].
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Per-class IoU and mIoU of predictions against labels.
    Eval {
        /// `gta`, `synthia`, or comma-separated class IDs.
        #[arg(long)]
        subset: Option<String>,
    },
    /// Aggregate coverage statistics from filter outputs.
    Stats,
}

fn build_config(common: &Common) -> Result<PipelineConfig> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    macro_rules! apply {
        ($($flag:ident),*) => {$(
            if let Some(v) = common.$flag {
                config.$flag = v;
            }
        )*};
    }
    apply!(tau, tau_prime, temperature, lambda, alpha, classes);
    if let Some(k) = common.superpixels {
        config.superpixels.num_superpixels = k;
    }
    if common.workers.is_some() {
        config.workers = common.workers;
    }
    if common.out.is_some() {
        config.out = common.out.clone();
    }
    Ok(config)
}

fn load_manifest(common: &Common) -> Result<Manifest> {
    let path = common
        .manifest
        .as_ref()
        .context("this command needs --manifest")?;
    Manifest::load(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut config = build_config(&cli.common)?;
    if let Command::ProtoLoss {
        exclude_absent,
        raw_dot,
        ..
    } = &cli.command
    {
        config.exclude_absent |= exclude_absent;
        config.normalize_projected &= !raw_dot;
    }
    if let Command::Eval { subset: Some(s) } = &cli.command {
        config.class_subset = Some(parse_subset(s)?);
    }
    config.validate()?;
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context::new(config, out, cli.common.force)?;
    log::debug!(
        "{}",
        serde_json::json!({ "event": "start", "workers": ctx.workers() })
    );

    match cli.command {
        Command::Prompts => commands::prompts::run(&ctx, &load_manifest(&cli.common)?),
        Command::Filter => commands::filter::run(&ctx, &load_manifest(&cli.common)?),
        Command::Refine => commands::refine::run(&ctx, &load_manifest(&cli.common)?),
        Command::Prototypes {
            allow_absent,
            strict_order,
        } => commands::prototypes::run(
            &ctx,
            &load_manifest(&cli.common)?,
            PrototypeOptions {
                allow_absent,
                strict_order,
            },
        ),
        Command::ProtoLoss {
            bank,
            head_weight,
            head_bias,
            grad,
            ..
        } => commands::proto_loss::run(
            &ctx,
            &load_manifest(&cli.common)?,
            &LossOptions {
                bank,
                head_weight,
                head_bias,
                grad,
            },
        ),
        Command::Ema {
            teacher,
            student,
            output,
        } => {
            let output = output.unwrap_or_else(|| ctx.out.join("teacher.npy"));
            commands::ema::run(&teacher, &student, ctx.config.alpha, &output)
        }
        Command::Eval { .. } => {
            let subset = ctx.config.subset();
            commands::eval::run(&ctx, &load_manifest(&cli.common)?, &subset)
        }
        Command::Stats => commands::stats::run(&ctx, &load_manifest(&cli.common)?),
    }
}

fn main() -> ExitCode {
    logging::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) if outcome.success() => ExitCode::SUCCESS,
        Ok(outcome) => {
            eprintln!("{} record(s) failed", outcome.failed);
            ExitCode::from(1)
        }
        Err(e) => {
            logging::event(
                log::Level::Error,
                "fatal",
                serde_json::json!({ "error": format!("{e:#}") }),
            );
            ExitCode::from(2)
        }
    }
}
