//! Run-length encoded binary masks and mask-set documents.
//!
//! Runs are row-major and alternate zeros/ones, always starting with a
//! zeros-run. A mask whose first pixel is set therefore begins with a
//! zero-length run.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary mask stored as run lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    runs: Vec<u32>,
    area: u64,
}

impl BinaryMask {
    /// Builds a mask from runs, checking that the runs cover exactly
    /// `height * width` pixels.
    pub fn from_runs(height: usize, width: usize, runs: Vec<u32>) -> Result<Self> {
        let (total, area) = run_totals(&runs);
        let pixels = (height * width) as u64;
        if total != pixels {
            return Err(Error::InvalidRle(format!(
                "runs sum to {total}, expected {pixels} for {height}x{width}"
            )));
        }
        Ok(BinaryMask {
            height,
            width,
            runs,
            area,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    /// Number of set pixels.
    pub fn area(&self) -> u64 {
        self.area
    }

    /// Row-major indices of the set pixels, ascending.
    pub fn pixel_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let mut start = 0usize;
        self.runs.iter().enumerate().flat_map(move |(i, &len)| {
            let range = start..start + len as usize;
            start += len as usize;
            if i % 2 == 1 {
                range
            } else {
                0..0
            }
        })
    }
}

fn run_totals(runs: &[u32]) -> (u64, u64) {
    runs.iter()
        .enumerate()
        .fold((0, 0), |(total, area), (i, &len)| {
            let len = u64::from(len);
            (total + len, if i % 2 == 1 { area + len } else { area })
        })
}

/// Encodes a row-major boolean grid.
pub fn encode_rle(pixels: &[bool], height: usize, width: usize) -> Result<BinaryMask> {
    if height == 0 || width == 0 {
        return Err(Error::DimensionMismatch(format!(
            "mask grid must be nonempty, got {height}x{width}"
        )));
    }
    if pixels.len() != height * width {
        return Err(Error::DimensionMismatch(format!(
            "grid has {} pixels, expected {}",
            pixels.len(),
            height * width
        )));
    }
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    let mut area = 0u64;
    for &p in pixels {
        if p != current {
            runs.push(len);
            len = 0;
            current = p;
        }
        len += 1;
        area += u64::from(p);
    }
    runs.push(len);
    Ok(BinaryMask {
        height,
        width,
        runs,
        area,
    })
}

/// Expands a mask back into a row-major boolean grid.
pub fn decode_rle(mask: &BinaryMask) -> Vec<bool> {
    let mut grid = Vec::with_capacity(mask.height * mask.width);
    for (i, &len) in mask.runs.iter().enumerate() {
        grid.extend(std::iter::repeat_n(i % 2 == 1, len as usize));
    }
    grid
}

/// An ordered collection of candidate masks for one image.
///
/// Order is meaningful: it breaks ties between equal-area masks downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    height: usize,
    width: usize,
    masks: Vec<BinaryMask>,
}

impl MaskSet {
    pub fn new(height: usize, width: usize, masks: Vec<BinaryMask>) -> Result<Self> {
        if let Some((i, m)) = masks
            .iter()
            .enumerate()
            .find(|(_, m)| m.height != height || m.width != width)
        {
            return Err(Error::DimensionMismatch(format!(
                "mask {i} is {}x{}, mask set is {height}x{width}",
                m.height, m.width
            )));
        }
        Ok(MaskSet {
            height,
            width,
            masks,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn masks(&self) -> &[BinaryMask] {
        &self.masks
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MaskSetDoc::from(self)).expect("mask set serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, MaskSetParseError> {
        let doc: MaskSetDoc = serde_json::from_str(text)?;
        Ok(doc.try_into()?)
    }
}

/// Failure to parse a mask-set document.
#[derive(Debug, thiserror::Error)]
pub enum MaskSetParseError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] Error),
}

#[derive(Serialize, Deserialize)]
struct MaskDoc {
    runs: Vec<u32>,
    area: u64,
}

#[derive(Serialize, Deserialize)]
struct MaskSetDoc {
    height: usize,
    width: usize,
    masks: Vec<MaskDoc>,
}

impl From<&MaskSet> for MaskSetDoc {
    fn from(set: &MaskSet) -> Self {
        MaskSetDoc {
            height: set.height,
            width: set.width,
            masks: set
                .masks
                .iter()
                .map(|m| MaskDoc {
                    runs: m.runs.clone(),
                    area: m.area,
                })
                .collect(),
        }
    }
}

impl TryFrom<MaskSetDoc> for MaskSet {
    type Error = Error;

    fn try_from(doc: MaskSetDoc) -> Result<Self> {
        let masks = doc
            .masks
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                let mask = BinaryMask::from_runs(doc.height, doc.width, m.runs)?;
                if mask.area != m.area {
                    return Err(Error::InvalidRle(format!(
                        "mask {i} declares area {} but runs encode {}",
                        m.area, mask.area
                    )));
                }
                Ok(mask)
            })
            .collect::<Result<Vec<_>>>()?;
        MaskSet::new(doc.height, doc.width, masks)
    }
}

pub fn load_mask_set(path: impl AsRef<Path>) -> Result<MaskSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let doc: MaskSetDoc =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))?;
    doc.try_into()
}

pub fn save_mask_set(set: &MaskSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &MaskSetDoc::from(set)).map_err(|e| Error::json(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
