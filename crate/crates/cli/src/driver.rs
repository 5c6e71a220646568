//! Per-image fan-out over a worker pool with results kept in manifest order.

use std::path::{Path, PathBuf};
use std::time::SystemTime;

use anyhow::{Context as _, Result};
use log::Level;
use maskalign::{Manifest, ManifestRecord};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::logging::event;

/// A per-image result and whether it was read back from existing outputs.
pub struct Done<T> {
    pub value: T,
    pub reused: bool,
}

impl<T> Done<T> {
    pub fn computed(value: T) -> Self {
        Done {
            value,
            reused: false,
        }
    }

    pub fn reused(value: T) -> Self {
        Done {
            value,
            reused: true,
        }
    }
}

/// Per-image results of one stage, in manifest order.
pub struct StageResults<T> {
    pub items: Vec<(String, Result<T, String>)>,
}

impl<T> StageResults<T> {
    pub fn failed(&self) -> usize {
        self.items.iter().filter(|(_, r)| r.is_err()).count()
    }

    pub fn all_ok(&self) -> bool {
        self.failed() == 0
    }

    pub fn successes(&self) -> impl Iterator<Item = (&str, &T)> {
        self.items
            .iter()
            .filter_map(|(n, r)| r.as_ref().ok().map(|v| (n.as_str(), v)))
    }
}

pub struct Context {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub force: bool,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(config: PipelineConfig, out: PathBuf, force: bool) -> Result<Self> {
        let workers = config
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .context("building worker pool")?;
        Ok(Context {
            config,
            out,
            force,
            pool,
        })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// `out/<dir>`, created on demand.
    pub fn dir(&self, dir: &str) -> Result<PathBuf> {
        let path = self.out.join(dir);
        std::fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(path)
    }

    /// True when resuming is allowed and every output exists and is at
    /// least as new as every input.
    pub fn fresh(&self, inputs: &[&Path], outputs: &[PathBuf]) -> bool {
        if self.force {
            return false;
        }
        let mtime = |p: &Path| std::fs::metadata(p).and_then(|m| m.modified()).ok();
        let oldest_output = outputs
            .iter()
            .map(|p| mtime(p))
            .try_fold(None::<SystemTime>, |acc, t| {
                t.map(|t| Some(acc.map_or(t, |a: SystemTime| a.min(t))))
            });
        let Some(Some(oldest_output)) = oldest_output else {
            return false;
        };
        inputs
            .iter()
            .all(|p| mtime(p).is_some_and(|t| t <= oldest_output))
    }

    /// Runs `task` on every record in parallel. Failures are logged and
    /// kept; nothing is merged here.
    pub fn map_records<T, F>(
        &self,
        stage: &'static str,
        manifest: &Manifest,
        task: F,
    ) -> StageResults<T>
    where
        T: Send,
        F: Fn(&str, &ManifestRecord) -> Result<Done<T>> + Sync,
    {
        if manifest.is_empty() {
            event(Level::Warn, "empty_manifest", json!({ "stage": stage }));
        }
        let items: Vec<(String, Result<T, String>, bool)> = self.pool.install(|| {
            manifest
                .iter()
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|(name, record)| {
                    let mut reused = false;
                    let result = match task(name, record) {
                        Ok(done) => {
                            reused = done.reused;
                            event(
                                Level::Info,
                                if done.reused {
                                    "image_skipped"
                                } else {
                                    "image_done"
                                },
                                json!({ "stage": stage, "image": name }),
                            );
                            Ok(done.value)
                        }
                        Err(e) => {
                            let message = format!("{e:#}");
                            event(
                                Level::Error,
                                "image_failed",
                                json!({ "stage": stage, "image": name, "error": message }),
                            );
                            Err(message)
                        }
                    };
                    (name.to_string(), result, reused)
                })
                .collect()
        });
        let reused = items
            .iter()
            .filter(|(_, r, reused)| r.is_ok() && *reused)
            .count();
        let failed = items.iter().filter(|(_, r, _)| r.is_err()).count();
        eprintln!(
            "{stage}: {} image(s), {} computed, {reused} reused, {failed} failed",
            items.len(),
            items.len() - reused - failed
        );
        StageResults {
            items: items.into_iter().map(|(n, r, _)| (n, r)).collect(),
        }
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
