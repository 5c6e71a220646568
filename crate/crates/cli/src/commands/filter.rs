use std::path::PathBuf;

use anyhow::Result;
use maskalign::masks::COVERAGE_CSV_HEADER;
use maskalign::rle::{load_mask_set, save_mask_set};
use maskalign::{
    build_mask_id_map, coverage_stats, overlap_filter, CoverageStats, InputKind, Manifest,
    PointPromptSet,
};

use super::Outcome;
use crate::driver::{read_json, write_json, write_text, Context, Done, StageResults};

/// Per-image paths written by the filter stage.
pub struct FilterOutputs {
    pub id_map: PathBuf,
    pub masks: PathBuf,
    pub coverage: PathBuf,
}

impl FilterOutputs {
    pub fn new(ctx: &Context, name: &str) -> Result<Self> {
        let dir = ctx.dir("masks")?;
        Ok(FilterOutputs {
            id_map: dir.join(format!("{name}.png")),
            masks: dir.join(format!("{name}.masks.json")),
            coverage: dir.join(format!("{name}.coverage.json")),
        })
    }

    fn all(&self) -> [PathBuf; 3] {
        [
            self.id_map.clone(),
            self.masks.clone(),
            self.coverage.clone(),
        ]
    }
}

/// Greedy overlap removal, mask-ID maps and coverage figures.
///
/// The prompt count comes from this image's prompt file when the prompts
/// stage has run, and otherwise from the number of candidate masks.
pub fn run(ctx: &Context, manifest: &Manifest) -> Result<Outcome> {
    let prompt_dir = ctx.out.join("prompts");
    let results = ctx.map_records("filter", manifest, |name, record| {
        let masks_path = record.require(InputKind::Masks)?;
        let prompts_path = prompt_dir.join(format!("{name}.json"));
        let has_prompts = prompts_path.is_file();
        let out = FilterOutputs::new(ctx, name)?;

        let mut inputs = vec![masks_path];
        if has_prompts {
            inputs.push(&prompts_path);
        }
        if ctx.fresh(&inputs, &out.all()) {
            return Ok(Done::reused(read_json::<CoverageStats>(&out.coverage)?));
        }

        let candidates = load_mask_set(masks_path)?;
        let filtered = overlap_filter(&candidates)?;
        let ids = build_mask_id_map(&filtered, candidates.height(), candidates.width())?;
        let prompt_count = if has_prompts {
            PointPromptSet::load(&prompts_path)?.len()
        } else {
            candidates.len()
        };
        let stats = coverage_stats(&ids, prompt_count);
        ids.save_png(&out.id_map)?;
        save_mask_set(&filtered.to_mask_set(), &out.masks)?;
        write_json(&out.coverage, &stats)?;
        Ok(Done::computed(stats))
    });
    write_coverage_csv(ctx, &results)?;
    Ok(Outcome {
        failed: results.failed(),
    })
}

/// Writes `coverage.csv` with one row per successful image.
pub fn write_coverage_csv(ctx: &Context, results: &StageResults<CoverageStats>) -> Result<()> {
    let mut csv = String::from(COVERAGE_CSV_HEADER);
    csv.push('\n');
    for (name, stats) in results.successes() {
        csv.push_str(&stats.csv_row(name));
        csv.push('\n');
    }
    std::fs::create_dir_all(&ctx.out)?;
    write_text(&ctx.out.join("coverage.csv"), &csv)
}
