use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{LabelMap, IGNORE_LABEL};
use crate::tensor::{load_tensor, save_tensor, DenseTensor};

/// Majority-vote downsampling of a label map.
///
/// Output cell `(i, j)` covers source rows `floor(i*H/H')..floor((i+1)*H/H')`
/// and the analogous columns. Ignore pixels do not vote; ties go to the
/// lowest class ID; a cell with no votes is ignore.
pub fn downsample_labels(
    labels: &LabelMap,
    target_height: usize,
    target_width: usize,
) -> Result<LabelMap> {
    let (h, w) = (labels.height(), labels.width());
    if target_height == 0 || target_width == 0 || target_height > h || target_width > w {
        return Err(Error::DimensionMismatch(format!(
            "cannot downsample {h}x{w} labels to {target_height}x{target_width}"
        )));
    }
    if (target_height, target_width) == (h, w) {
        return Ok(labels.clone());
    }
    let mut votes = [0u32; 256];
    let mut out = Vec::with_capacity(target_height * target_width);
    for i in 0..target_height {
        let (r0, r1) = (i * h / target_height, (i + 1) * h / target_height);
        for j in 0..target_width {
            let (c0, c1) = (j * w / target_width, (j + 1) * w / target_width);
            votes.iter_mut().for_each(|v| *v = 0);
            for r in r0..r1 {
                for c in c0..c1 {
                    votes[usize::from(labels.get(r, c))] += 1;
                }
            }
            votes[usize::from(IGNORE_LABEL)] = 0;
            let (label, count) =
                votes
                    .iter()
                    .enumerate()
                    .fold((IGNORE_LABEL, 0u32), |best, (l, &n)| {
                        if n > best.1 {
                            (l as u8, n)
                        } else {
                            best
                        }
                    });
            out.push(if count == 0 { IGNORE_LABEL } else { label });
        }
    }
    LabelMap::new(target_height, target_width, out)
}

/// Running per-class feature sums and pixel counts, in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeAccumulator {
    classes: usize,
    dim: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl PrototypeAccumulator {
    pub fn new(classes: usize, dim: usize) -> Self {
        PrototypeAccumulator {
            classes,
            dim,
            sums: vec![0.0; classes * dim],
            counts: vec![0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Adds every labeled pixel of an H′×W′×C feature map.
    pub fn accumulate(&mut self, features: &DenseTensor, labels: &LabelMap) -> Result<()> {
        let (h, w, c) = features.dims3()?;
        if c != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "features have {c} channels, accumulator expects {}",
                self.dim
            )));
        }
        if (h, w) != (labels.height(), labels.width()) {
            return Err(Error::DimensionMismatch(format!(
                "features are {h}x{w}, labels are {}x{}",
                labels.height(),
                labels.width()
            )));
        }
        labels.validate(self.classes)?;
        let values = features.to_f64_vec();
        for (i, &l) in labels.labels().iter().enumerate() {
            if l == IGNORE_LABEL {
                continue;
            }
            let k = usize::from(l);
            let row = &mut self.sums[k * c..(k + 1) * c];
            for (s, &f) in row.iter_mut().zip(&values[i * c..(i + 1) * c]) {
                *s += f;
            }
            self.counts[k] += 1;
        }
        Ok(())
    }

    /// Adds another accumulator's sums and counts.
    pub fn merge(&mut self, other: &PrototypeAccumulator) -> Result<()> {
        if (self.classes, self.dim) != (other.classes, other.dim) {
            return Err(Error::DimensionMismatch(format!(
                "accumulator {}x{} cannot merge {}x{}",
                self.classes, self.dim, other.classes, other.dim
            )));
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Classes that received no pixels.
    pub fn empty_classes(&self) -> Vec<usize> {
        (0..self.classes).filter(|&k| self.counts[k] == 0).collect()
    }
}

/// Accumulates one image into `acc`, returning the updated accumulator.
pub fn accumulate_prototypes(
    mut acc: PrototypeAccumulator,
    features: &DenseTensor,
    labels: &LabelMap,
) -> Result<PrototypeAccumulator> {
    acc.accumulate(features, labels)?;
    Ok(acc)
}

/// Unit-norm class prototypes; absent classes hold zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    classes: usize,
    dim: usize,
    prototypes: Vec<f32>,
    present: Vec<bool>,
    counts: Vec<u64>,
}

/// Sidecar written next to the prototype tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSidecar {
    pub present: Vec<bool>,
    pub counts: Vec<u64>,
    pub temperature: f64,
    pub normalize_projected: bool,
}

impl PrototypeBank {
    /// Builds a bank from rows; present rows must be unit-norm within 1e-6.
    pub fn new(
        classes: usize,
        dim: usize,
        prototypes: Vec<f32>,
        present: Vec<bool>,
        counts: Vec<u64>,
    ) -> Result<Self> {
        if prototypes.len() != classes * dim || present.len() != classes || counts.len() != classes
        {
            return Err(Error::DimensionMismatch(format!(
                "bank of {classes} classes x {dim} dims got {} values, {} flags, {} counts",
                prototypes.len(),
                present.len(),
                counts.len()
            )));
        }
        let bank = PrototypeBank {
            classes,
            dim,
            prototypes,
            present,
            counts,
        };
        for k in 0..classes {
            if bank.present[k] {
                let norm = bank
                    .row(k)
                    .iter()
                    .map(|&v| f64::from(v).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if (norm - 1.0).abs() >= 1e-6 {
                    return Err(Error::InvalidParameter(format!(
                        "prototype {k} has norm {norm}, expected 1"
                    )));
                }
            }
        }
        Ok(bank)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prototypes(&self) -> &[f32] {
        &self.prototypes
    }

    pub fn row(&self, class: usize) -> &[f32] {
        &self.prototypes[class * self.dim..(class + 1) * self.dim]
    }

    pub fn present(&self) -> &[bool] {
        &self.present
    }

    pub fn source_counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn to_tensor(&self) -> DenseTensor {
        DenseTensor::new(vec![self.classes, self.dim], self.prototypes.clone())
            .expect("bank dimensions are valid")
    }

    pub fn sidecar(&self, temperature: f64, normalize_projected: bool) -> BankSidecar {
        BankSidecar {
            present: self.present.clone(),
            counts: self.counts.clone(),
            temperature,
            normalize_projected,
        }
    }

    /// Writes the K×C tensor and its JSON sidecar.
    pub fn save(
        &self,
        tensor_path: &Path,
        sidecar: &BankSidecar,
        sidecar_path: &Path,
    ) -> Result<()> {
        save_tensor(&self.to_tensor(), tensor_path)?;
        let text =
            serde_json::to_string_pretty(sidecar).map_err(|e| Error::json(sidecar_path, e))?;
        std::fs::write(sidecar_path, text).map_err(|e| Error::io(sidecar_path, e))
    }

    pub fn load(tensor_path: &Path, sidecar_path: &Path) -> Result<(Self, BankSidecar)> {
        let tensor = load_tensor(tensor_path)?;
        let (classes, dim) = match tensor.shape() {
            &[k, c] => (k, c),
            other => {
                return Err(Error::DimensionMismatch(format!(
                    "prototype tensor must be rank 2, got {other:?}"
                )))
            }
        };
        let values = match tensor.as_f32() {
            Some(v) => v.to_vec(),
            None => tensor.to_f64_vec().into_iter().map(|v| v as f32).collect(),
        };
        let text = std::fs::read_to_string(sidecar_path).map_err(|e| Error::io(sidecar_path, e))?;
        let sidecar: BankSidecar =
            serde_json::from_str(&text).map_err(|e| Error::json(sidecar_path, e))?;
        let bank = PrototypeBank::new(
            classes,
            dim,
            values,
            sidecar.present.clone(),
            sidecar.counts.clone(),
        )?;
        Ok((bank, sidecar))
    }
}

/// Mean feature per observed class, then ℓ2-normalized.
pub fn finalize_prototypes(acc: &PrototypeAccumulator) -> Result<PrototypeBank> {
    if acc.counts.iter().all(|&n| n == 0) {
        return Err(Error::EmptyPrototypes);
    }
    let dim = acc.dim;
    let mut prototypes = vec![0f32; acc.classes * dim];
    let mut present = vec![false; acc.classes];
    for k in 0..acc.classes {
        let n = acc.counts[k];
        if n == 0 {
            continue;
        }
        let mean: Vec<f64> = acc.sums[k * dim..(k + 1) * dim]
            .iter()
            .map(|&s| s / n as f64)
            .collect();
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNormPrototype(k));
        }
        for (dst, v) in prototypes[k * dim..(k + 1) * dim].iter_mut().zip(&mean) {
            *dst = (v / norm) as f32;
        }
        present[k] = true;
    }
    PrototypeBank::new(acc.classes, dim, prototypes, present, acc.counts.clone())
}
