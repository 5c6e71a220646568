//! Confidence-thresholded pseudo-labels and their mask-level refinement.
//!
//! A pixel is *reliable* when its top probability exceeds `tau` and the gap
//! between its top two probabilities exceeds `tau_prime`, both strict.
//! A mask whose reliable pixels all share one argmax class is labeled with
//! that class in full; every other pixel keeps its thresholded label.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{write_gray8, LabelMap, MaskIdMap, IGNORE_LABEL};
use crate::probmap::ProbMap;

/// Thresholds for refinement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineParams {
    /// Confidence threshold on the top probability.
    pub tau: f64,
    /// Threshold on the top-1 minus top-2 probability gap.
    pub tau_prime: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            tau: 0.968,
            tau_prime: 0.99,
        }
    }
}

impl RefineParams {
    /// Both thresholds must lie in `(0, 1]`. A margin threshold of exactly
    /// 1 is accepted and disables mask assignment.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("tau_prime", self.tau_prime)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Where a refined label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Provenance {
    MaskAssigned = 0,
    PixelLevel = 1,
    Ignored = 2,
}

/// Labeled-pixel counts for one class before and after refinement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGain {
    pub before: u64,
    pub after: u64,
}

/// Output of [`refine`].
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedLabels {
    pub labels: LabelMap,
    pub provenance: Vec<Provenance>,
    /// Keyed by class ID; only classes with a nonzero count appear.
    pub stats: BTreeMap<u8, ClassGain>,
}

impl RefinedLabels {
    pub fn provenance_bytes(&self) -> Vec<u8> {
        self.provenance.iter().map(|&p| p as u8).collect()
    }

    /// Writes provenance codes (0, 1, 2) as an 8-bit grayscale PNG.
    pub fn save_provenance_png(&self, path: impl AsRef<Path>) -> Result<()> {
        write_gray8(
            path.as_ref(),
            self.labels.width(),
            self.labels.height(),
            &self.provenance_bytes(),
        )
    }

    pub fn total_before(&self) -> u64 {
        self.stats.values().map(|g| g.before).sum()
    }

    pub fn total_after(&self) -> u64 {
        self.stats.values().map(|g| g.after).sum()
    }
}

/// Top-1 probability, its class (lowest index on ties) and the top-2 probability.
fn top_two(dist: &[f32]) -> (usize, f32, f32) {
    let mut best = (0usize, dist[0]);
    let mut second = f32::NEG_INFINITY;
    for (c, &v) in dist.iter().enumerate().skip(1) {
        if v > best.1 {
            second = best.1;
            best = (c, v);
        } else if v > second {
            second = v;
        }
    }
    (best.0, best.1, second)
}

fn passes_confidence(top: f32, tau: f64) -> bool {
    top > tau as f32
}

fn passes_margin(top: f32, second: f32, tau_prime: f64) -> bool {
    top - second > tau_prime as f32
}

/// `max_c p > tau` per pixel.
pub fn confidence_mask(p: &ProbMap, tau: f64) -> Vec<bool> {
    (0..p.pixels())
        .map(|i| passes_confidence(top_two(p.pixel(i)).1, tau))
        .collect()
}

/// `p_(1) - p_(2) > tau_prime` per pixel.
pub fn margin_mask(p: &ProbMap, tau_prime: f64) -> Result<Vec<bool>> {
    if p.classes() < 2 {
        return Err(Error::InvalidParameter(format!(
            "margin needs at least 2 classes, got {}",
            p.classes()
        )));
    }
    Ok((0..p.pixels())
        .map(|i| {
            let (_, top, second) = top_two(p.pixel(i));
            passes_margin(top, second, tau_prime)
        })
        .collect())
}

fn check_label_range(p: &ProbMap) -> Result<()> {
    if p.classes() > usize::from(IGNORE_LABEL) {
        return Err(Error::InvalidParameter(format!(
            "{} classes do not fit below the ignore label",
            p.classes()
        )));
    }
    Ok(())
}

/// Per-pixel argmax, lowest class index on ties.
pub fn argmax_labels(p: &ProbMap) -> Result<LabelMap> {
    check_label_range(p)?;
    let labels = (0..p.pixels())
        .map(|i| top_two(p.pixel(i)).0 as u8)
        .collect();
    LabelMap::new(p.height(), p.width(), labels)
}

/// Argmax where the confidence criterion holds, ignore elsewhere.
pub fn threshold_labels(p: &ProbMap, tau: f64) -> Result<LabelMap> {
    check_label_range(p)?;
    let labels = (0..p.pixels())
        .map(|i| {
            let (c, top, _) = top_two(p.pixel(i));
            if passes_confidence(top, tau) {
                c as u8
            } else {
                IGNORE_LABEL
            }
        })
        .collect();
    LabelMap::new(p.height(), p.width(), labels)
}

/// Mask-level refinement with fallback to thresholded pixel labels.
pub fn refine(p: &ProbMap, idmap: &MaskIdMap, params: &RefineParams) -> Result<RefinedLabels> {
    params.validate()?;
    if p.classes() < 2 {
        return Err(Error::InvalidParameter(format!(
            "refinement needs at least 2 classes, got {}",
            p.classes()
        )));
    }
    if p.height() != idmap.height() || p.width() != idmap.width() {
        return Err(Error::DimensionMismatch(format!(
            "probmap is {}x{}, mask-id map is {}x{}",
            p.height(),
            p.width(),
            idmap.height(),
            idmap.width()
        )));
    }
    let base = threshold_labels(p, params.tau)?;

    #[derive(Clone, Copy)]
    enum Vote {
        None,
        Unanimous(u8),
        Conflict,
    }
    let mut votes = vec![Vote::None; idmap.count() + 1];
    for (i, &id) in idmap.ids().iter().enumerate() {
        if id == 0 {
            continue;
        }
        let (c, top, second) = top_two(p.pixel(i));
        if !(passes_confidence(top, params.tau) && passes_margin(top, second, params.tau_prime)) {
            continue;
        }
        let slot = &mut votes[usize::from(id)];
        *slot = match *slot {
            Vote::None => Vote::Unanimous(c as u8),
            Vote::Unanimous(k) if k == c as u8 => Vote::Unanimous(k),
            _ => Vote::Conflict,
        };
    }

    let mut labels = base.labels().to_vec();
    let mut provenance = Vec::with_capacity(labels.len());
    for (i, &id) in idmap.ids().iter().enumerate() {
        let prov = match votes[usize::from(id)] {
            Vote::Unanimous(k) if id != 0 => {
                labels[i] = k;
                Provenance::MaskAssigned
            }
            _ if labels[i] == IGNORE_LABEL => Provenance::Ignored,
            _ => Provenance::PixelLevel,
        };
        provenance.push(prov);
    }

    let mut stats: BTreeMap<u8, ClassGain> = BTreeMap::new();
    for &l in base.labels().iter().filter(|&&l| l != IGNORE_LABEL) {
        stats.entry(l).or_default().before += 1;
    }
    for &l in labels.iter().filter(|&&l| l != IGNORE_LABEL) {
        stats.entry(l).or_default().after += 1;
    }

    Ok(RefinedLabels {
        labels: LabelMap::new(p.height(), p.width(), labels)?,
        provenance,
        stats,
    })
}
