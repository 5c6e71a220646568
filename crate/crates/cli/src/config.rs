use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use maskalign::metrics::{gta_subset, synthia_subset};
use maskalign::proto::AlignConfig;
use maskalign::{RefineParams, SeedsParams};
use serde::{Deserialize, Serialize};

/// Every tunable of the pipeline. Loaded from JSON; command-line flags win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tau: f64,
    pub tau_prime: f64,
    pub temperature: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub superpixels: SeedsParams,
    pub normalize_projected: bool,
    pub exclude_absent: bool,
    pub classes: usize,
    pub class_subset: Option<Vec<usize>>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let refine = RefineParams::default();
        let align = AlignConfig::default();
        PipelineConfig {
            tau: refine.tau,
            tau_prime: refine.tau_prime,
            temperature: align.temperature,
            lambda: align.lambda,
            alpha: maskalign::proto::DEFAULT_ALPHA,
            superpixels: SeedsParams::default(),
            normalize_projected: align.normalize_projected,
            exclude_absent: align.exclude_absent,
            classes: 19,
            class_subset: None,
            workers: None,
            out: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn refine_params(&self) -> RefineParams {
        RefineParams {
            tau: self.tau,
            tau_prime: self.tau_prime,
        }
    }

    pub fn align(&self) -> AlignConfig {
        AlignConfig {
            temperature: self.temperature,
            lambda: self.lambda,
            normalize_projected: self.normalize_projected,
            exclude_absent: self.exclude_absent,
        }
    }

    /// Classes averaged into mIoU; all classes when unset.
    pub fn subset(&self) -> Vec<usize> {
        self.class_subset
            .clone()
            .unwrap_or_else(|| (0..self.classes).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.refine_params().validate()?;
        self.align().validate()?;
        self.superpixels.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            bail!("alpha must lie in [0, 1], got {}", self.alpha);
        }
        if !(1..=255).contains(&self.classes) {
            bail!("classes must be in 1..=255, got {}", self.classes);
        }
        if let Some(subset) = &self.class_subset {
            if subset.is_empty() {
                bail!("class_subset is empty");
            }
            if let Some(c) = subset.iter().find(|&&c| c >= self.classes) {
                bail!(
                    "class_subset entry {c} is out of range for {} classes",
                    self.classes
                );
            }
        }
        if self.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        Ok(())
    }
}

/// `gta` (all 19), `synthia` (16), or a comma-separated list of class IDs.
pub fn parse_subset(text: &str) -> Result<Vec<usize>> {
    match text {
        "gta" | "all19" => Ok(gta_subset()),
        "synthia" | "16" => Ok(synthia_subset()),
        list => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .with_context(|| format!("bad class id {s:?} in subset"))
            })
            .collect(),
    }
}
