use anyhow::Result;
use log::Level;
use maskalign::{confusion, iou_report, ConfusionMatrix, InputKind, LabelMap, Manifest};
use serde_json::json;

use super::Outcome;
use crate::driver::{write_text, Context, Done};
use crate::logging::event;

/// Confusion over the manifest's prediction/label pairs, then per-class
/// IoU and mIoU over `subset`. Reports are written only when every image
/// was evaluated.
pub fn run(ctx: &Context, manifest: &Manifest, subset: &[usize]) -> Result<Outcome> {
    let classes = ctx.config.classes;
    let results = ctx.map_records("eval", manifest, |_, record| {
        let pred = LabelMap::load_png(record.require(InputKind::Prediction)?)?;
        let gt = LabelMap::load_png(record.require(InputKind::Labels)?)?;
        Ok(Done::computed(confusion(&pred, &gt, classes)?))
    });
    if !results.all_ok() {
        log::error!("evaluation report not written: some images failed");
        return Ok(Outcome {
            failed: results.failed(),
        });
    }

    let mut total = ConfusionMatrix::new(classes);
    for (_, cm) in results.successes() {
        total.add(cm)?;
    }
    let report = iou_report(&total, subset)?;
    std::fs::create_dir_all(&ctx.out)?;
    write_text(&ctx.out.join("eval.json"), &(report.to_json() + "\n"))?;
    let table = format!("{}\n{}\n", report.table_header(), report.table_row());
    write_text(&ctx.out.join("eval.txt"), &table)?;
    print!("{table}");
    event(
        Level::Info,
        "eval_done",
        json!({ "miou": report.miou, "pixels": total.total(), "ignored": total.ignored() }),
    );
    Ok(Outcome::ok())
}
