use std::path::Path;

use anyhow::{Context as _, Result};
use maskalign::proto::ema_update_tensor;
use maskalign::tensor::{load_tensor, save_tensor};

use super::Outcome;

/// `output = alpha * teacher + (1 - alpha) * student` over whole tensors.
pub fn run(teacher: &Path, student: &Path, alpha: f64, output: &Path) -> Result<Outcome> {
    let t =
        load_tensor(teacher).with_context(|| format!("loading teacher {}", teacher.display()))?;
    let s =
        load_tensor(student).with_context(|| format!("loading student {}", student.display()))?;
    let updated = ema_update_tensor(&t, &s, alpha)?;
    if let Some(parent) = output.parent() {
        std::fs::create_dir_all(parent)?;
    }
    save_tensor(&updated, output)?;
    Ok(Outcome::ok())
}
