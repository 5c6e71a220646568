//! Confusion matrices, per-class IoU and mean IoU.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{LabelMap, IGNORE_LABEL};

/// Cityscapes evaluation classes, in train-ID order.
pub const CITYSCAPES_CLASSES: [&str; 19] = [
    "Road", "S.walk", "Build.", "Wall", "Fence", "Pole", "Tr.Light", "Sign", "Veget.", "Terrain",
    "Sky", "Person", "Rider", "Car", "Truck", "Bus", "Train", "M.bike", "Bike",
];

/// Classes without SYNTHIA annotations: Terrain, Truck, Train.
pub const SYNTHIA_EXCLUDED: [usize; 3] = [9, 14, 16];

/// All 19 classes.
pub fn gta_subset() -> Vec<usize> {
    (0..CITYSCAPES_CLASSES.len()).collect()
}

/// The 16 classes scored for SYNTHIA sources.
pub fn synthia_subset() -> Vec<usize> {
    gta_subset()
        .into_iter()
        .filter(|c| !SYNTHIA_EXCLUDED.contains(c))
        .collect()
}

/// Pixel counts indexed `[ground truth][prediction]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
    ignored: u64,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
            ignored: 0,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Row-major `classes × classes` counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    /// Ground-truth ignore pixels skipped.
    pub fn ignored(&self) -> u64 {
        self.ignored
    }

    /// Pixels counted into the matrix.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn transpose(&self) -> ConfusionMatrix {
        let k = self.classes;
        let mut counts = vec![0; k * k];
        for g in 0..k {
            for p in 0..k {
                counts[p * k + g] = self.counts[g * k + p];
            }
        }
        ConfusionMatrix {
            classes: k,
            counts,
            ignored: self.ignored,
        }
    }

    /// Adds another matrix over the same classes.
    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::DimensionMismatch(format!(
                "confusion over {} classes cannot absorb {}",
                self.classes, other.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.ignored += other.ignored;
        Ok(())
    }

    /// Adds one image. Ground-truth ignore pixels are skipped; any other
    /// label, in either map, must be below `classes`.
    pub fn accumulate(&mut self, pred: &LabelMap, gt: &LabelMap) -> Result<()> {
        if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
            return Err(Error::DimensionMismatch(format!(
                "prediction is {}x{}, ground truth is {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        let k = self.classes;
        for (index, (&p, &g)) in pred.labels().iter().zip(gt.labels()).enumerate() {
            if g == IGNORE_LABEL {
                self.ignored += 1;
                continue;
            }
            for label in [g, p] {
                if usize::from(label) >= k {
                    return Err(Error::LabelOutOfRange {
                        index,
                        label,
                        classes: k,
                    });
                }
            }
            self.counts[usize::from(g) * k + usize::from(p)] += 1;
        }
        Ok(())
    }
}

/// Confusion matrix of a single prediction against its ground truth.
pub fn confusion(pred: &LabelMap, gt: &LabelMap, classes: usize) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(classes);
    cm.accumulate(pred, gt)?;
    Ok(cm)
}

/// Per-class IoU (`None` where undefined) and the mean over a class subset.
#[derive(Debug, Clone, PartialEq)]
pub struct IoUReport {
    pub per_class: Vec<Option<f64>>,
    pub subset: Vec<usize>,
    /// `None` when no subset class is defined.
    pub miou: Option<f64>,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    per_class: BTreeMap<String, Option<f64>>,
    subset: &'a [usize],
    miou: Option<f64>,
}

impl IoUReport {
    /// JSON keyed by class name where one is known, class ID otherwise.
    pub fn to_json(&self) -> String {
        let per_class = self
            .per_class
            .iter()
            .enumerate()
            .map(|(c, v)| (class_name(c, self.per_class.len()), *v))
            .collect();
        let doc = ReportDoc {
            per_class,
            subset: &self.subset,
            miou: self.miou,
        };
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    /// Header for [`IoUReport::table_row`].
    pub fn table_header(&self) -> String {
        let mut cells: Vec<String> = (0..self.per_class.len())
            .map(|c| format!("{:>8}", class_name(c, self.per_class.len())))
            .collect();
        cells.push(format!("{:>8}", "mIoU"));
        cells.join(" ")
    }

    /// Fixed-width percentages to one decimal; classes outside the subset
    /// or undefined print `--`.
    pub fn table_row(&self) -> String {
        let pct = |v: Option<f64>| match v {
            Some(x) => format!("{:>8.1}", x * 100.0),
            None => format!("{:>8}", "--"),
        };
        let mut cells: Vec<String> = self
            .per_class
            .iter()
            .enumerate()
            .map(|(c, &v)| pct(if self.subset.contains(&c) { v } else { None }))
            .collect();
        cells.push(pct(self.miou));
        cells.join(" ")
    }
}

fn class_name(class: usize, classes: usize) -> String {
    if classes == CITYSCAPES_CLASSES.len() {
        CITYSCAPES_CLASSES[class].to_string()
    } else {
        class.to_string()
    }
}

/// `IoU_c = TP / (TP + FP + FN)`; classes with a zero denominator are
/// undefined and left out of the mean.
pub fn iou_report(cm: &ConfusionMatrix, subset: &[usize]) -> Result<IoUReport> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let k = cm.classes;
    if let Some(&c) = subset.iter().find(|&&c| c >= k) {
        return Err(Error::InvalidParameter(format!(
            "subset class {c} out of range for {k} classes"
        )));
    }
    let per_class: Vec<Option<f64>> = (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let gt_total: u64 = (0..k).map(|p| cm.get(c, p)).sum();
            let pred_total: u64 = (0..k).map(|g| cm.get(g, c)).sum();
            let denom = gt_total + pred_total - tp;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect();
    let mut subset = subset.to_vec();
    subset.sort_unstable();
    subset.dedup();
    let defined: Vec<f64> = subset.iter().filter_map(|&c| per_class[c]).collect();
    let miou = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(IoUReport {
        per_class,
        subset,
        miou,
    })
}
