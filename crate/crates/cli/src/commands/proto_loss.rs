use std::path::PathBuf;

use anyhow::{Context as _, Result};
use log::Level;
use maskalign::proto::{
    downsample_labels, project, proto_loss_with_grad, prototype_loss, ProjectionHead, PrototypeBank,
};
use maskalign::tensor::{load_tensor, save_tensor};
use maskalign::{InputKind, LabelMap, Manifest};
use serde::Serialize;
use serde_json::json;

use super::Outcome;
use crate::driver::{write_json, Context, Done};
use crate::logging::event;

#[derive(Debug, Clone, Default)]
pub struct LossOptions {
    /// Prototype tensor; its sidecar sits next to it with a `.json` extension.
    pub bank: Option<PathBuf>,
    pub head_weight: Option<PathBuf>,
    pub head_bias: Option<PathBuf>,
    /// Also write ∂L/∂z per image.
    pub grad: bool,
}

#[derive(Serialize)]
struct ImageLoss {
    image: String,
    loss: f64,
    pixels: usize,
}

#[derive(Serialize)]
struct LossReport {
    images: Vec<ImageLoss>,
    /// Pixel-weighted mean over images.
    mean_loss: f64,
    lambda: f64,
    weighted_loss: f64,
}

/// Prototype contrastive loss of each image's (projected) features against
/// the bank, with optional gradients for an external trainer.
pub fn run(ctx: &Context, manifest: &Manifest, opts: &LossOptions) -> Result<Outcome> {
    let tensor_path = opts
        .bank
        .clone()
        .unwrap_or_else(|| ctx.out.join("prototypes.npy"));
    let sidecar_path = tensor_path.with_extension("json");
    let (bank, sidecar) = PrototypeBank::load(&tensor_path, &sidecar_path)
        .with_context(|| format!("loading prototype bank {}", tensor_path.display()))?;
    let cfg = ctx.config.align();
    if sidecar.temperature != cfg.temperature
        || sidecar.normalize_projected != cfg.normalize_projected
    {
        event(
            Level::Warn,
            "bank_config_differs",
            json!({
                "bank_temperature": sidecar.temperature,
                "temperature": cfg.temperature,
                "bank_normalize_projected": sidecar.normalize_projected,
                "normalize_projected": cfg.normalize_projected,
            }),
        );
    }
    let head = match (&opts.head_weight, &opts.head_bias) {
        (Some(w), Some(b)) => Some(ProjectionHead::from_tensors(
            &load_tensor(w)?,
            &load_tensor(b)?,
        )?),
        (None, None) => None,
        _ => anyhow::bail!("--head-weight and --head-bias must be given together"),
    };
    let grad_dir = if opts.grad {
        Some(ctx.dir("proto_grad")?)
    } else {
        None
    };

    let results = ctx.map_records("proto-loss", manifest, |name, record| {
        let features = load_tensor(record.require(InputKind::Features)?)?;
        let z = match &head {
            Some(h) => project(&features, h)?,
            None => features,
        };
        let (h, w, _) = z.dims3()?;
        let labels = LabelMap::load_png(record.require(InputKind::Labels)?)?;
        let labels = downsample_labels(&labels, h, w)?;
        let loss = match &grad_dir {
            Some(dir) => {
                let (loss, grad) = proto_loss_with_grad(&z, &bank, &labels, &cfg)?;
                save_tensor(&grad, dir.join(format!("{name}.npy")))?;
                loss
            }
            None => prototype_loss(&z, &bank, &labels, &cfg)?,
        };
        Ok(Done::computed(ImageLoss {
            image: name.to_string(),
            loss,
            pixels: labels.labeled_count(),
        }))
    });

    let failed = results.failed();
    if failed > 0 {
        log::error!("proto_loss.json not written: some images failed");
        return Ok(Outcome { failed });
    }
    let images: Vec<ImageLoss> = results
        .items
        .into_iter()
        .filter_map(|(_, r)| r.ok())
        .collect();
    let pixels: usize = images.iter().map(|i| i.pixels).sum();
    let mean_loss = if pixels == 0 {
        0.0
    } else {
        images.iter().map(|i| i.loss * i.pixels as f64).sum::<f64>() / pixels as f64
    };
    let report = LossReport {
        mean_loss,
        lambda: cfg.lambda,
        weighted_loss: cfg.lambda * mean_loss,
        images,
    };
    std::fs::create_dir_all(&ctx.out)?;
    write_json(&ctx.out.join("proto_loss.json"), &report)?;
    println!(
        "proto loss {:.6} (lambda {} -> {:.6})",
        report.mean_loss, report.lambda, report.weighted_loss
    );
    Ok(Outcome::ok())
}
