use anyhow::{Context as _, Result};
use maskalign::{CoverageStats, Manifest};
use serde::Serialize;

use super::filter::{write_coverage_csv, FilterOutputs};
use super::Outcome;
use crate::driver::{read_json, write_json, Context, Done};

/// Dataset-level means of the per-image coverage figures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageSummary {
    pub images: usize,
    pub mean_prompts: f64,
    pub mean_masks: f64,
    pub mean_coverage: f64,
}

impl CoverageSummary {
    pub fn from_stats<'a>(stats: impl IntoIterator<Item = &'a CoverageStats>) -> Option<Self> {
        let stats: Vec<&CoverageStats> = stats.into_iter().collect();
        if stats.is_empty() {
            return None;
        }
        let n = stats.len() as f64;
        let mean = |f: fn(&CoverageStats) -> f64| stats.iter().map(|s| f(s)).sum::<f64>() / n;
        Some(CoverageSummary {
            images: stats.len(),
            mean_prompts: mean(|s| s.prompt_count as f64),
            mean_masks: mean(|s| s.mask_count as f64),
            mean_coverage: mean(|s| s.coverage),
        })
    }

    /// `"<prompts>, <masks>, <coverage> %"` with rounded counts.
    pub fn row(&self) -> String {
        format!(
            "{:.0}, {:.0}, {:.2} %",
            self.mean_prompts,
            self.mean_masks,
            self.mean_coverage * 100.0
        )
    }
}

/// Re-reads the filter stage's per-image coverage files, rewrites the
/// aggregate CSV and prints the mean prompt/mask/coverage row.
pub fn run(ctx: &Context, manifest: &Manifest) -> Result<Outcome> {
    let results = ctx.map_records("stats", manifest, |name, _| {
        let path = FilterOutputs::new(ctx, name)?.coverage;
        let stats: CoverageStats = read_json(&path)
            .with_context(|| format!("no filter output for {name}; run `filter` first"))?;
        Ok(Done::computed(stats))
    });
    write_coverage_csv(ctx, &results)?;
    if let Some(summary) = CoverageSummary::from_stats(results.successes().map(|(_, s)| s)) {
        write_json(&ctx.out.join("coverage_summary.json"), &summary)?;
        println!("prompts, masks, coverage");
        println!("{}", summary.row());
    }
    Ok(Outcome {
        failed: results.failed(),
    })
}
