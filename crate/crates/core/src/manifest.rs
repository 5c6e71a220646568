//! Per-image manifests: a JSON array of records naming the inputs each
//! pipeline stage reads.

use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One image's inputs. Every path is optional; a stage checks the ones it
/// needs before running.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probmap: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Predicted label map, read by evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<PathBuf>,
}

/// Which input a stage requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Image,
    Probmap,
    Masks,
    Features,
    Labels,
    Prediction,
}

impl InputKind {
    pub fn key(self) -> &'static str {
        match self {
            InputKind::Image => "image",
            InputKind::Probmap => "probmap",
            InputKind::Masks => "masks",
            InputKind::Features => "features",
            InputKind::Labels => "labels",
            InputKind::Prediction => "prediction",
        }
    }
}

impl ManifestRecord {
    pub fn path(&self, kind: InputKind) -> Option<&Path> {
        match kind {
            InputKind::Image => self.image.as_deref(),
            InputKind::Probmap => self.probmap.as_deref(),
            InputKind::Masks => self.masks.as_deref(),
            InputKind::Features => self.features.as_deref(),
            InputKind::Labels => self.labels.as_deref(),
            InputKind::Prediction => self.prediction.as_deref(),
        }
    }

    /// Returns the path for `kind` or an error naming the missing key.
    pub fn require(&self, kind: InputKind) -> Result<&Path> {
        self.path(kind)
            .ok_or_else(|| Error::InvalidParameter(format!("record has no '{}' entry", kind.key())))
    }

    /// Every input that is present, in key order.
    pub fn inputs(&self) -> impl Iterator<Item = &Path> {
        [
            &self.image,
            &self.probmap,
            &self.masks,
            &self.features,
            &self.labels,
            &self.prediction,
        ]
        .into_iter()
        .filter_map(|p| p.as_deref())
    }

    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.image,
            &mut self.probmap,
            &mut self.masks,
            &mut self.features,
            &mut self.labels,
            &mut self.prediction,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// An ordered list of records plus a stable output name for each.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    records: Vec<ManifestRecord>,
    names: Vec<String>,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Self {
        let names = output_names(&records);
        Manifest { records, names }
    }

    /// Reads a manifest; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records: Vec<ManifestRecord> =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for r in &mut records {
            r.resolve(base);
        }
        Ok(Manifest::new(records))
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Output file stem for record `i`.
    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ManifestRecord)> {
        self.names.iter().map(String::as_str).zip(&self.records)
    }
}

/// Derives a file stem per record from its first present input. Duplicate
/// stems get a `-<index>` suffix so outputs never collide.
fn output_names(records: &[ManifestRecord]) -> Vec<String> {
    let stems: Vec<String> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.inputs()
                .next()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("record{i}"))
        })
        .collect();
    let mut counts = std::collections::HashMap::new();
    for s in &stems {
        *counts.entry(s.as_str()).or_insert(0usize) += 1;
    }
    let mut used = HashSet::new();
    stems
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut name = if counts[s.as_str()] > 1 {
                format!("{s}-{i}")
            } else {
                s.clone()
            };
            while !used.insert(name.clone()) {
                name.push('_');
            }
            name
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"[{"image": "a/img0.png", "probmap": "/abs/p0.npy"}, {"labels": "l1.png"}]"#,
        )
        .unwrap();
        let m = Manifest::load(&path).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(
            m.records()[0].image.as_deref(),
            Some(dir.path().join("a/img0.png").as_path())
        );
        assert_eq!(
            m.records()[0].probmap.as_deref(),
            Some(Path::new("/abs/p0.npy"))
        );
        assert_eq!(m.name(0), "img0");
        assert_eq!(m.name(1), "l1");
        assert!(m.records()[1].require(InputKind::Masks).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, r#"[{"imgae": "x.png"}]"#).unwrap();
        assert!(Manifest::load(&path).is_err());
    }

    #[test]
    fn duplicate_stems_get_suffixes() {
        let rec = |p: &str| ManifestRecord {
            probmap: Some(PathBuf::from(p)),
            ..Default::default()
        };
        let m = Manifest::new(vec![
            rec("a/prob.npy"),
            rec("b/prob.npy"),
            rec("c/other.npy"),
        ]);
        assert_eq!(m.name(0), "prob-0");
        assert_eq!(m.name(1), "prob-1");
        assert_eq!(m.name(2), "other");
    }
}
