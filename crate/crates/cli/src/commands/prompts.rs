use anyhow::Result;
use log::Level;
use maskalign::superpixel::{load_rgb_image, normalize_prompts, region_centers_snapped};
use maskalign::{seeds_partition, InputKind, Manifest, PointPromptSet};
use serde_json::json;

use super::Outcome;
use crate::driver::{Context, Done};
use crate::logging::event;

/// Superpixels and one point prompt per region for every image.
pub fn run(ctx: &Context, manifest: &Manifest) -> Result<Outcome> {
    let prompt_dir = ctx.dir("prompts")?;
    let sp_dir = ctx.dir("superpixels")?;
    let params = ctx.config.superpixels;

    let results = ctx.map_records("prompts", manifest, |name, record| {
        let image = record.require(InputKind::Image)?;
        let prompts_path = prompt_dir.join(format!("{name}.json"));
        let sp_path = sp_dir.join(format!("{name}.png"));
        if ctx.fresh(&[image], &[prompts_path.clone(), sp_path.clone()]) {
            return Ok(Done::reused(PointPromptSet::load(&prompts_path)?.len()));
        }
        let rgb = load_rgb_image(image)?;
        let sp = seeds_partition(&rgb, &params)?;
        let prompts = normalize_prompts(&region_centers_snapped(&sp), sp.width(), sp.height())?;
        sp.save_png(&sp_path)?;
        prompts.save(&prompts_path)?;
        event(
            Level::Debug,
            "prompts",
            json!({ "image": name, "prompts": prompts.len() }),
        );
        Ok(Done::computed(prompts.len()))
    });

    let counts: Vec<usize> = results.successes().map(|(_, &n)| n).collect();
    if !counts.is_empty() {
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        event(
            Level::Info,
            "prompts_summary",
            json!({ "images": counts.len(), "mean_prompts": mean }),
        );
    }
    Ok(Outcome {
        failed: results.failed(),
    })
}
