//! SEEDS superpixels and the point prompts derived from them.
//!
//! The partition starts from a regular grid, exchanges blocks between
//! neighboring regions from coarse to fine block sizes, then refines
//! individual boundary pixels. Every move must strictly increase a
//! color-histogram intersection score. A final pass reattaches any region
//! fragment that ended up disconnected, so every region is 4-connected.

mod prompts;
mod seeds;

use std::path::Path;

use crate::error::{Error, Result};
use crate::label::{read_gray16, write_gray16};
use crate::tensor::DenseTensor;

pub use prompts::{
    normalize_prompts, region_centers, region_centers_snapped, PointPrompt, PointPromptSet,
};
pub use seeds::seeds_partition;

/// Parameters for [`seeds_partition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SeedsParams {
    /// Upper bound on the number of regions.
    pub num_superpixels: usize,
    /// Depth of the block hierarchy; `1` means pixel-level updates only.
    pub levels: usize,
    /// Color quantization per RGB channel; histograms have `bins^3` bins.
    pub bins_per_channel: usize,
    /// Sweeps per level.
    pub iterations: usize,
    /// Weight of the 3×3 same-label neighbor count in pixel updates.
    pub smoothing_prior: u32,
}

impl Default for SeedsParams {
    fn default() -> Self {
        SeedsParams {
            num_superpixels: 1000,
            levels: 4,
            bins_per_channel: 5,
            iterations: 4,
            smoothing_prior: 2,
        }
    }
}

impl SeedsParams {
    pub fn with_superpixels(num_superpixels: usize) -> Self {
        SeedsParams {
            num_superpixels,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_superpixels == 0 || self.num_superpixels > usize::from(u16::MAX) + 1 {
            return Err(Error::InvalidParameter(format!(
                "num_superpixels must be in 1..=65536, got {}",
                self.num_superpixels
            )));
        }
        if self.levels == 0 {
            return Err(Error::InvalidParameter("levels must be >= 1".into()));
        }
        if !(2..=256).contains(&self.bins_per_channel) {
            return Err(Error::InvalidParameter(format!(
                "bins_per_channel must be in 2..=256, got {}",
                self.bins_per_channel
            )));
        }
        Ok(())
    }
}

/// Region IDs per pixel, `0..count`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelMap {
    height: usize,
    width: usize,
    ids: Vec<u16>,
    count: usize,
}

impl SuperpixelMap {
    /// Wraps an ID buffer; IDs must be dense in `0..count`.
    pub fn new(height: usize, width: usize, ids: Vec<u16>) -> Result<Self> {
        if height == 0 || width == 0 || ids.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "superpixel buffer of {} entries for {height}x{width}",
                ids.len()
            )));
        }
        let count = ids.iter().copied().max().map_or(0, usize::from) + 1;
        let mut seen = vec![false; count];
        for &id in &ids {
            seen[usize::from(id)] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidParameter(format!(
                "superpixel id {missing} labels no pixels"
            )));
        }
        Ok(SuperpixelMap {
            height,
            width,
            ids,
            count,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn ids(&self) -> &[u16] {
        &self.ids
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let (w, h, ids) = read_gray16(path.as_ref())?;
        SuperpixelMap::new(h, w, ids)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        write_gray16(path.as_ref(), self.width, self.height, &self.ids)
    }
}

/// Loads an RGB image as an H×W×3 `uint8` tensor, from PNG or `.npy`.
pub fn load_rgb_image(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("npy"))
    {
        let t = crate::tensor::load_tensor(path)?;
        check_rgb(&t)?;
        return Ok(t);
    }
    let img = image::open(path)
        .map_err(|e| Error::image(path, e))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    DenseTensor::new(vec![h as usize, w as usize, 3], img.into_raw())
}

pub(crate) fn check_rgb(image: &DenseTensor) -> Result<(usize, usize, &[u8])> {
    let (h, w, c) = image.dims3()?;
    if c != 3 {
        return Err(Error::DimensionMismatch(format!(
            "expected 3 color channels, got {c}"
        )));
    }
    let data = image.as_u8().ok_or(Error::DtypeMismatch {
        expected: "uint8",
        found: image.dtype().name(),
    })?;
    Ok((h, w, data))
}
