use anyhow::{bail, Result};
use log::Level;
use maskalign::proto::{downsample_labels, finalize_prototypes, PrototypeAccumulator};
use maskalign::tensor::load_tensor;
use maskalign::{DenseTensor, InputKind, LabelMap, Manifest};
use serde_json::json;

use super::Outcome;
use crate::driver::Context;
use crate::logging::event;

#[derive(Debug, Clone, Copy, Default)]
pub struct PrototypeOptions {
    /// Keep going when some class has no pixels.
    pub allow_absent: bool,
    /// Sum all images into one accumulator in manifest order instead of
    /// merging per-image partial sums.
    pub strict_order: bool,
}

enum Part {
    Partial(PrototypeAccumulator),
    Raw(DenseTensor, LabelMap),
}

/// Builds the class prototype bank from per-image features and labels.
/// Writes `prototypes.npy` and `prototypes.json` only when every image
/// succeeded.
pub fn run(ctx: &Context, manifest: &Manifest, opts: PrototypeOptions) -> Result<Outcome> {
    let classes = ctx.config.classes;
    let results = ctx.map_records("prototypes", manifest, |_, record| {
        let features = load_tensor(record.require(InputKind::Features)?)?;
        let (h, w, c) = features.dims3()?;
        let labels = LabelMap::load_png(record.require(InputKind::Labels)?)?;
        let labels = downsample_labels(&labels, h, w)?;
        labels.validate(classes)?;
        Ok(crate::driver::Done::computed(if opts.strict_order {
            Part::Raw(features, labels)
        } else {
            let mut acc = PrototypeAccumulator::new(classes, c);
            acc.accumulate(&features, &labels)?;
            Part::Partial(acc)
        }))
    });
    if !results.all_ok() {
        log::error!("prototype bank not written: some images failed");
        return Ok(Outcome {
            failed: results.failed(),
        });
    }

    let mut total: Option<PrototypeAccumulator> = None;
    for (name, part) in results.successes() {
        let dim = match part {
            Part::Partial(a) => a.dim(),
            Part::Raw(f, _) => f.shape()[2],
        };
        let acc = total.get_or_insert_with(|| PrototypeAccumulator::new(classes, dim));
        let merged = match part {
            Part::Partial(a) => acc.merge(a),
            Part::Raw(f, l) => acc.accumulate(f, l),
        };
        if let Err(e) = merged {
            bail!("{name}: {e}");
        }
    }
    let Some(total) = total else {
        bail!("no images to build prototypes from");
    };
    let bank = finalize_prototypes(&total)?;
    let sidecar = bank.sidecar(ctx.config.temperature, ctx.config.normalize_projected);
    std::fs::create_dir_all(&ctx.out)?;
    bank.save(
        &ctx.out.join("prototypes.npy"),
        &sidecar,
        &ctx.out.join("prototypes.json"),
    )?;

    let absent = total.empty_classes();
    event(
        Level::Info,
        "prototypes_written",
        json!({ "classes": classes, "dim": bank.dim(), "absent": absent }),
    );
    if !absent.is_empty() && !opts.allow_absent {
        event(
            Level::Error,
            "absent_classes",
            json!({ "classes": absent, "hint": "pass --allow-absent to accept" }),
        );
        return Ok(Outcome { failed: 1 });
    }
    Ok(Outcome::ok())
}
