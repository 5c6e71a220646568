#![allow(dead_code)]

use maskalign::{encode_rle, BinaryMask, MaskIdMap, MaskSet, ProbMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Up to `max_masks` random masks over a grid of at most `max_side`².
/// Masks are blobs (random rectangles plus noise) so overlaps are common.
pub fn random_mask_set(rng: &mut ChaCha8Rng, max_side: usize, max_masks: usize) -> MaskSet {
    let h = rng.gen_range(1..=max_side);
    let w = rng.gen_range(1..=max_side);
    let n = rng.gen_range(0..=max_masks);
    let masks = (0..n).map(|_| random_mask(rng, h, w)).collect();
    MaskSet::new(h, w, masks).unwrap()
}

pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> BinaryMask {
    let (r0, c0) = (rng.gen_range(0..h), rng.gen_range(0..w));
    let (r1, c1) = (rng.gen_range(r0..h), rng.gen_range(c0..w));
    let noise = rng.gen_range(0.0..0.3);
    let grid: Vec<bool> = (0..h * w)
        .map(|p| {
            let (r, c) = (p / w, p % w);
            let inside = (r0..=r1).contains(&r) && (c0..=c1).contains(&c);
            inside != rng.gen_bool(noise)
        })
        .collect();
    encode_rle(&grid, h, w).unwrap()
}

/// Disjoint random regions painted from a coarse random partition,
/// with a random share of pixels left uncovered.
pub fn random_id_map(rng: &mut ChaCha8Rng, h: usize, w: usize, max_masks: usize) -> MaskIdMap {
    let k = rng.gen_range(0..=max_masks);
    if k == 0 {
        return MaskIdMap::empty(h, w);
    }
    let raw: Vec<u16> = (0..h * w)
        .map(|p| {
            // vertical stripes keep masks spatially coherent
            let stripe = (p % w) * k / w;
            if rng.gen_bool(0.2) {
                0
            } else {
                stripe as u16 + 1
            }
        })
        .collect();
    MaskIdMap::from_ids(h, w, compact(raw)).unwrap()
}

/// Relabels nonzero IDs densely in order of first appearance.
pub fn compact(ids: Vec<u16>) -> Vec<u16> {
    let mut map = std::collections::HashMap::new();
    ids.into_iter()
        .map(|id| {
            if id == 0 {
                0
            } else {
                let next = map.len() as u16 + 1;
                *map.entry(id).or_insert(next)
            }
        })
        .collect()
}

/// Probability maps mixing near-one-hot pixels (which pass the default
/// refinement thresholds) with diffuse ones.
pub fn random_probmap(rng: &mut ChaCha8Rng, h: usize, w: usize, classes: usize) -> ProbMap {
    let dominant: Vec<usize> = (0..w).map(|_| rng.gen_range(0..classes)).collect();
    let mut probs = Vec::with_capacity(h * w * classes);
    for p in 0..h * w {
        let mut dist: Vec<f32> = match rng.gen_range(0..4) {
            0 | 1 => {
                let c = if rng.gen_bool(0.8) {
                    dominant[p % w]
                } else {
                    rng.gen_range(0..classes)
                };
                let top = rng.gen_range(0.99..1.0f32);
                let rest = (1.0 - top) / (classes - 1) as f32;
                (0..classes)
                    .map(|k| if k == c { top } else { rest })
                    .collect()
            }
            2 => {
                let c = rng.gen_range(0..classes);
                let top = rng.gen_range(0.9..0.999f32);
                let rest = (1.0 - top) / (classes - 1) as f32;
                (0..classes)
                    .map(|k| if k == c { top } else { rest })
                    .collect()
            }
            _ => (0..classes).map(|_| rng.gen_range(0.0..1.0f32)).collect(),
        };
        let sum: f32 = dist.iter().sum();
        dist.iter_mut().for_each(|v| *v /= sum);
        probs.extend(dist);
    }
    ProbMap::new(h, w, classes, probs).unwrap()
}
