//! Overlap-aware greedy mask filtering and mask-ID map construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::MaskIdMap;
use crate::rle::{encode_rle, BinaryMask, MaskSet};

/// Pairwise-disjoint masks left after greedy filtering, in processing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredMaskSet {
    height: usize,
    width: usize,
    masks: Vec<BinaryMask>,
    original_index: Vec<usize>,
}

impl FilteredMaskSet {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn masks(&self) -> &[BinaryMask] {
        &self.masks
    }

    /// Input position of each retained mask.
    pub fn original_index(&self) -> &[usize] {
        &self.original_index
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Repackages the retained masks as a plain mask set.
    pub fn to_mask_set(&self) -> MaskSet {
        MaskSet::new(self.height, self.width, self.masks.clone()).expect("dimensions match")
    }
}

/// Greedy overlap removal.
///
/// Masks are visited by descending original area (ties by ascending input
/// index). Each mask loses the pixels already claimed by earlier masks; a
/// mask left empty is dropped.
pub fn overlap_filter(candidates: &MaskSet) -> Result<FilteredMaskSet> {
    let (h, w) = (candidates.height(), candidates.width());
    let masks = candidates.masks();
    if let Some(m) = masks.iter().find(|m| m.height() != h || m.width() != w) {
        return Err(Error::DimensionMismatch(format!(
            "mask is {}x{}, set is {h}x{w}",
            m.height(),
            m.width()
        )));
    }

    let mut order: Vec<usize> = (0..masks.len()).collect();
    order.sort_by(|&a, &b| masks[b].area().cmp(&masks[a].area()).then(a.cmp(&b)));

    let mut claimed = vec![false; h * w];
    let mut kept = Vec::new();
    let mut original_index = Vec::new();
    let mut trimmed = vec![false; h * w];
    for i in order {
        let mut any = false;
        let mut touched = Vec::new();
        for p in masks[i].pixel_indices() {
            if !claimed[p] {
                claimed[p] = true;
                trimmed[p] = true;
                touched.push(p);
                any = true;
            }
        }
        if any {
            kept.push(encode_rle(&trimmed, h, w)?);
            original_index.push(i);
            for p in touched {
                trimmed[p] = false;
            }
        }
    }
    Ok(FilteredMaskSet {
        height: h,
        width: w,
        masks: kept,
        original_index,
    })
}

/// Paints retained mask `k` (0-based) with ID `k + 1`; uncovered pixels stay 0.
pub fn build_mask_id_map(
    filtered: &FilteredMaskSet,
    height: usize,
    width: usize,
) -> Result<MaskIdMap> {
    if filtered.height != height || filtered.width != width {
        return Err(Error::DimensionMismatch(format!(
            "filtered masks are {}x{}, requested {height}x{width}",
            filtered.height, filtered.width
        )));
    }
    if filtered.masks.len() > usize::from(u16::MAX) {
        return Err(Error::InvalidParameter(format!(
            "{} masks exceed the 65535 mask-id limit",
            filtered.masks.len()
        )));
    }
    let mut ids = vec![0u16; height * width];
    for (k, mask) in filtered.masks.iter().enumerate() {
        if mask.area() == 0 {
            return Err(Error::InvalidParameter(format!(
                "retained mask {k} is empty"
            )));
        }
        for p in mask.pixel_indices() {
            if ids[p] != 0 {
                return Err(Error::OverlappingMasks(p));
            }
            ids[p] = (k + 1) as u16;
        }
    }
    Ok(MaskIdMap::from_parts_unchecked(
        height,
        width,
        ids,
        filtered.masks.len(),
    ))
}

/// Per-image prompt/mask/coverage figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub prompt_count: usize,
    pub mask_count: usize,
    pub covered_pixels: usize,
    pub total_pixels: usize,
    pub coverage: f64,
}

impl CoverageStats {
    /// `"<masks>, <coverage %> %"`, e.g. `117, 91.46 %`.
    pub fn table_row(&self) -> String {
        format!("{}, {:.2} %", self.mask_count, self.coverage * 100.0)
    }

    /// One line of the aggregate coverage CSV.
    pub fn csv_row(&self, image: &str) -> String {
        format!("{image}, {}, {}", self.prompt_count, self.table_row())
    }
}

/// Header line of the aggregate coverage CSV.
pub const COVERAGE_CSV_HEADER: &str = "image, prompts, masks, coverage";

pub fn coverage_stats(idmap: &MaskIdMap, prompt_count: usize) -> CoverageStats {
    let covered = idmap.ids().iter().filter(|&&id| id != 0).count();
    let total = idmap.ids().len();
    CoverageStats {
        prompt_count,
        mask_count: idmap.count(),
        covered_pixels: covered,
        total_pixels: total,
        coverage: covered as f64 / total as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rle::decode_rle;

    fn mask(h: usize, w: usize, pixels: &[(usize, usize)]) -> BinaryMask {
        let mut grid = vec![false; h * w];
        for &(r, c) in pixels {
            grid[r * w + c] = true;
        }
        encode_rle(&grid, h, w).unwrap()
    }

    #[test]
    fn larger_mask_wins_overlap() {
        let m1 = mask(2, 2, &[(0, 0), (0, 1), (1, 0)]);
        let m2 = mask(2, 2, &[(0, 1), (1, 1)]);
        let set = MaskSet::new(2, 2, vec![m2.clone(), m1.clone()]).unwrap();
        let f = overlap_filter(&set).unwrap();
        assert_eq!(f.masks(), &[m1, mask(2, 2, &[(1, 1)])]);
        assert_eq!(f.original_index(), &[1, 0]);

        let ids = build_mask_id_map(&f, 2, 2).unwrap();
        assert_eq!(ids.ids(), &[1, 1, 1, 2]);
        assert_eq!(ids.count(), 2);
    }

    #[test]
    fn identical_masks_keep_first() {
        let m = mask(2, 2, &[(0, 0), (1, 1)]);
        let set = MaskSet::new(2, 2, vec![m.clone(), m.clone()]).unwrap();
        let f = overlap_filter(&set).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.original_index(), &[0]);
    }

    #[test]
    fn disjoint_masks_survive_unchanged() {
        let a = mask(3, 3, &[(0, 0)]);
        let b = mask(3, 3, &[(1, 1), (1, 2)]);
        let c = mask(3, 3, &[(2, 0), (2, 1), (2, 2)]);
        let set = MaskSet::new(3, 3, vec![a.clone(), b.clone(), c.clone()]).unwrap();
        let f = overlap_filter(&set).unwrap();
        assert_eq!(f.masks(), &[c, b, a]);
        assert_eq!(f.original_index(), &[2, 1, 0]);
    }

    #[test]
    fn empty_and_full_id_maps() {
        let set = MaskSet::new(2, 3, vec![]).unwrap();
        let f = overlap_filter(&set).unwrap();
        let ids = build_mask_id_map(&f, 2, 3).unwrap();
        assert_eq!(ids.count(), 0);
        assert!(ids.ids().iter().all(|&i| i == 0));

        let full = encode_rle(&[true; 6], 2, 3).unwrap();
        let f = overlap_filter(&MaskSet::new(2, 3, vec![full]).unwrap()).unwrap();
        let ids = build_mask_id_map(&f, 2, 3).unwrap();
        assert_eq!(ids.ids(), &[1; 6]);
        assert_eq!(ids.count(), 1);
    }

    #[test]
    fn overlapping_input_is_a_contract_violation() {
        let a = mask(1, 2, &[(0, 0), (0, 1)]);
        let bad = FilteredMaskSet {
            height: 1,
            width: 2,
            masks: vec![a.clone(), a],
            original_index: vec![0, 1],
        };
        assert!(matches!(
            build_mask_id_map(&bad, 1, 2),
            Err(Error::OverlappingMasks(0))
        ));
    }

    #[test]
    fn coverage_figures() {
        let ids = MaskIdMap::new(2, 2, vec![1; 4], 1).unwrap();
        let s = coverage_stats(&ids, 4);
        assert_eq!((s.prompt_count, s.mask_count, s.covered_pixels), (4, 1, 4));
        assert_eq!(s.coverage, 1.0);

        let s = coverage_stats(&MaskIdMap::empty(2, 2), 0);
        assert_eq!(s.coverage, 0.0);
    }

    #[test]
    fn table_row_format() {
        let s = CoverageStats {
            prompt_count: 882,
            mask_count: 117,
            covered_pixels: 9146,
            total_pixels: 10000,
            coverage: 0.9146,
        };
        assert_eq!(s.table_row(), "117, 91.46 %");
        assert_eq!(s.csv_row("ours"), "ours, 882, 117, 91.46 %");
    }

    #[test]
    fn filter_is_idempotent_on_example() {
        let m1 = mask(2, 2, &[(0, 0), (0, 1), (1, 0)]);
        let m2 = mask(2, 2, &[(0, 1), (1, 1)]);
        let f = overlap_filter(&MaskSet::new(2, 2, vec![m1, m2]).unwrap()).unwrap();
        let again = overlap_filter(&f.to_mask_set()).unwrap();
        assert_eq!(again.masks(), f.masks());
        let union: Vec<bool> = f
            .masks()
            .iter()
            .map(decode_rle)
            .fold(vec![false; 4], |acc, g| {
                acc.iter().zip(g).map(|(a, b)| *a || b).collect()
            });
        assert_eq!(union, vec![true; 4]);
    }
}
