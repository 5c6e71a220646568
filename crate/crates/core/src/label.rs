//! Per-pixel integer maps: semantic label maps and mask-ID maps, with
//! their PNG persistence (8-bit for labels, 16-bit for mask IDs).

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma};

use crate::error::{Error, Result};

/// Reserved label value for pixels excluded from losses and metrics.
pub const IGNORE_LABEL: u8 = 255;

/// An H×W map of semantic class IDs. `255` marks ignored pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u8>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || labels.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "label buffer of {} entries for {height}x{width}",
                labels.len()
            )));
        }
        Ok(LabelMap {
            height,
            width,
            labels,
        })
    }

    /// A map with every pixel set to the ignore value.
    pub fn ignored(height: usize, width: usize) -> Self {
        LabelMap {
            height,
            width,
            labels: vec![IGNORE_LABEL; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Number of non-ignore pixels.
    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != IGNORE_LABEL).count()
    }

    /// Checks that every non-ignore label is below `classes`.
    pub fn validate(&self, classes: usize) -> Result<()> {
        match self
            .labels
            .iter()
            .position(|&l| l != IGNORE_LABEL && usize::from(l) >= classes)
        {
            Some(index) => Err(Error::LabelOutOfRange {
                index,
                label: self.labels[index],
                classes,
            }),
            None => Ok(()),
        }
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (w, h, raw) = read_gray8(path)?;
        LabelMap::new(h, w, raw)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        write_gray8(path.as_ref(), self.width, self.height, &self.labels)
    }
}

/// Per-pixel mask IDs: `0` is uncovered, `1..=count` index retained masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskIdMap {
    height: usize,
    width: usize,
    ids: Vec<u16>,
    count: usize,
}

impl MaskIdMap {
    /// Wraps an ID buffer. `count` is the number of masks; every ID in
    /// `1..=count` must label at least one pixel and no ID may exceed it.
    pub fn new(height: usize, width: usize, ids: Vec<u16>, count: usize) -> Result<Self> {
        if height == 0 || width == 0 || ids.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "id buffer of {} entries for {height}x{width}",
                ids.len()
            )));
        }
        let mut seen = vec![false; count + 1];
        for &id in &ids {
            let id = usize::from(id);
            if id > count {
                return Err(Error::InvalidParameter(format!(
                    "mask id {id} exceeds count {count}"
                )));
            }
            seen[id] = true;
        }
        if let Some(missing) = (1..=count).find(|&k| !seen[k]) {
            return Err(Error::InvalidParameter(format!(
                "mask id {missing} labels no pixels"
            )));
        }
        Ok(MaskIdMap {
            height,
            width,
            ids,
            count,
        })
    }

    /// Wraps an ID buffer, taking the count as the largest ID present.
    pub fn from_ids(height: usize, width: usize, ids: Vec<u16>) -> Result<Self> {
        let count = ids.iter().copied().max().map_or(0, usize::from);
        MaskIdMap::new(height, width, ids, count)
    }

    /// A map with no masks.
    pub fn empty(height: usize, width: usize) -> Self {
        MaskIdMap {
            height,
            width,
            ids: vec![0; height * width],
            count: 0,
        }
    }

    pub(crate) fn from_parts_unchecked(
        height: usize,
        width: usize,
        ids: Vec<u16>,
        count: usize,
    ) -> Self {
        MaskIdMap {
            height,
            width,
            ids,
            count,
        }
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
        let path = path.as_ref();
        let (w, h, ids) = read_gray16(path)?;
        MaskIdMap::from_ids(h, w, ids)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        write_gray16(path.as_ref(), self.width, self.height, &self.ids)
    }
}

pub(crate) fn read_gray8(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => {
            return Err(Error::image(
                path,
                format!("expected 8-bit grayscale PNG, found {:?}", other.color()),
            ))
        }
    };
    let (w, h) = gray.dimensions();
    Ok((w as usize, h as usize, gray.into_raw()))
}

pub(crate) fn write_gray8(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let img = GrayImage::from_raw(width as u32, height as u32, data.to_vec())
        .ok_or_else(|| Error::image(path, "buffer does not match dimensions"))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::image(path, e))
}

pub(crate) fn read_gray16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let img = image::open(path).map_err(|e| Error::image(path, e))?;
    let gray = match img {
        image::DynamicImage::ImageLuma16(g) => g,
        other => {
            return Err(Error::image(
                path,
                format!("expected 16-bit grayscale PNG, found {:?}", other.color()),
            ))
        }
    };
    let (w, h) = gray.dimensions();
    Ok((w as usize, h as usize, gray.into_raw()))
}

pub(crate) fn write_gray16(path: &Path, width: usize, height: usize, data: &[u16]) -> Result<()> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, data.to_vec())
            .ok_or_else(|| Error::image(path, "buffer does not match dimensions"))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::image(path, e))
}
