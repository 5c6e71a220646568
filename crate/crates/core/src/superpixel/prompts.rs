use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SuperpixelMap;
use crate::error::{Error, Result};

/// A normalized point prompt; `x` and `y` lie in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPrompt {
    pub x: f64,
    pub y: f64,
    pub region: usize,
}

/// One prompt per superpixel, persisted as a JSON array.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointPromptSet {
    pub points: Vec<PointPrompt>,
}

impl PointPromptSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn lower_median(values: &mut [usize]) -> usize {
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Per-axis median `(x, y)` of each region, lower median for even counts.
///
/// The point can fall outside a non-convex region; see
/// [`region_centers_snapped`].
pub fn region_centers(sp: &SuperpixelMap) -> Vec<(usize, usize)> {
    let mut xs = vec![Vec::new(); sp.count()];
    let mut ys = vec![Vec::new(); sp.count()];
    for (p, &id) in sp.ids().iter().enumerate() {
        xs[usize::from(id)].push(p % sp.width());
        ys[usize::from(id)].push(p / sp.width());
    }
    xs.iter_mut()
        .zip(ys.iter_mut())
        .map(|(x, y)| (lower_median(x), lower_median(y)))
        .collect()
}

/// As [`region_centers`], but a center outside its region moves to the
/// nearest region pixel (squared Euclidean distance, row-major tie order).
pub fn region_centers_snapped(sp: &SuperpixelMap) -> Vec<(usize, usize)> {
    let w = sp.width();
    let mut centers = region_centers(sp);
    for (region, c) in centers.iter_mut().enumerate() {
        if usize::from(sp.ids()[c.1 * w + c.0]) == region {
            continue;
        }
        let (cx, cy) = (c.0 as i64, c.1 as i64);
        let nearest = sp
            .ids()
            .iter()
            .enumerate()
            .filter(|(_, &id)| usize::from(id) == region)
            .map(|(p, _)| {
                let (x, y) = ((p % w) as i64, (p / w) as i64);
                ((x - cx).pow(2) + (y - cy).pow(2), p)
            })
            .min()
            .expect("regions are nonempty");
        *c = (nearest.1 % w, nearest.1 / w);
    }
    centers
}

/// Converts pixel centers to `(x / width, y / height)`. The region of each
/// prompt is its position in `centers`.
pub fn normalize_prompts(
    centers: &[(usize, usize)],
    width: usize,
    height: usize,
) -> Result<PointPromptSet> {
    let points = centers
        .iter()
        .enumerate()
        .map(|(region, &(x, y))| {
            if x >= width || y >= height {
                return Err(Error::CenterOutOfBounds {
                    x,
                    y,
                    width,
                    height,
                });
            }
            Ok(PointPrompt {
                x: x as f64 / width as f64,
                y: y as f64 / height as f64,
                region,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PointPromptSet { points })
}
