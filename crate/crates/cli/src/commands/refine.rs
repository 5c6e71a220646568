use std::collections::BTreeMap;

use anyhow::Result;
use maskalign::probmap::DEFAULT_SUM_TOLERANCE;
use maskalign::pseudo_label::ClassGain;
use maskalign::rle::load_mask_set;
use maskalign::tensor::load_tensor;
use maskalign::{
    build_mask_id_map, overlap_filter, refine, validate_probmap, InputKind, Manifest, ProbMap,
};

use super::Outcome;
use crate::driver::{read_json, write_json, write_text, Context, Done};

/// Filters masks and refines the teacher's pseudo-labels for every image.
pub fn run(ctx: &Context, manifest: &Manifest) -> Result<Outcome> {
    let dir = ctx.dir("refined")?;
    let params = ctx.config.refine_params();

    let results = ctx.map_records("refine", manifest, |name, record| {
        let probmap = record.require(InputKind::Probmap)?;
        let masks = record.require(InputKind::Masks)?;
        let labels_path = dir.join(format!("{name}.png"));
        let prov_path = dir.join(format!("{name}.provenance.png"));
        let stats_path = dir.join(format!("{name}.stats.json"));
        let outputs = [labels_path.clone(), prov_path.clone(), stats_path.clone()];
        if ctx.fresh(&[probmap, masks], &outputs) {
            return Ok(Done::reused(read_json::<BTreeMap<u8, ClassGain>>(
                &stats_path,
            )?));
        }

        let p = ProbMap::from_tensor(load_tensor(probmap)?)?;
        validate_probmap(&p, DEFAULT_SUM_TOLERANCE)?;
        let candidates = load_mask_set(masks)?;
        let filtered = overlap_filter(&candidates)?;
        let ids = build_mask_id_map(&filtered, candidates.height(), candidates.width())?;
        let refined = refine(&p, &ids, &params)?;

        refined.labels.save_png(&labels_path)?;
        refined.save_provenance_png(&prov_path)?;
        write_json(&stats_path, &refined.stats)?;
        Ok(Done::computed(refined.stats))
    });

    if results.all_ok() {
        let mut totals: BTreeMap<u8, ClassGain> = BTreeMap::new();
        for (_, stats) in results.successes() {
            for (&class, gain) in stats {
                let t = totals.entry(class).or_default();
                t.before += gain.before;
                t.after += gain.after;
            }
        }
        write_text(&ctx.out.join("refine_gains.csv"), &gains_csv(&totals))?;
    } else {
        log::warn!("refine_gains.csv not written: some images failed");
    }
    Ok(Outcome {
        failed: results.failed(),
    })
}

fn gains_csv(totals: &BTreeMap<u8, ClassGain>) -> String {
    let mut csv = String::from("class, before, after\n");
    let (mut before, mut after) = (0, 0);
    for (class, g) in totals {
        csv.push_str(&format!("{class}, {}, {}\n", g.before, g.after));
        before += g.before;
        after += g.after;
    }
    csv.push_str(&format!("total, {before}, {after}\n"));
    csv
}
