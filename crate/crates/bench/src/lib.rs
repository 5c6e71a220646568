//! Seeded fixtures shared by the kernel benchmarks.

use maskalign::proto::{finalize_prototypes, PrototypeAccumulator, PrototypeBank};
use maskalign::{encode_rle, DenseTensor, LabelMap, MaskIdMap, MaskSet, ProbMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` random rectangles, the way a prompt-driven segmenter tends to overlap.
pub fn rectangle_masks(rng: &mut ChaCha8Rng, h: usize, w: usize, n: usize) -> MaskSet {
    let masks = (0..n)
        .map(|_| {
            let (r0, c0) = (rng.gen_range(0..h), rng.gen_range(0..w));
            let (r1, c1) = (
                rng.gen_range(r0..h.min(r0 + h / 4 + 1)),
                rng.gen_range(c0..w.min(c0 + w / 4 + 1)),
            );
            let grid: Vec<bool> = (0..h * w)
                .map(|p| (r0..=r1).contains(&(p / w)) && (c0..=c1).contains(&(p % w)))
                .collect();
            encode_rle(&grid, h, w).expect("grid matches dimensions")
        })
        .collect();
    MaskSet::new(h, w, masks).expect("masks match set")
}

/// Piecewise-constant RGB image with mild noise.
pub fn blocky_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> DenseTensor {
    let palette: Vec<[u8; 3]> = (0..8).map(|_| rng.gen()).collect();
    let px: Vec<u8> = (0..h * w)
        .flat_map(|p| {
            let base = palette[((p / w) / 32 + (p % w) / 48) % palette.len()];
            base.map(|b| b.saturating_add(rng.gen_range(0..12)))
        })
        .collect();
    DenseTensor::new(vec![h, w, 3], px).expect("buffer matches shape")
}

/// Mostly confident softmax outputs.
pub fn probmap(rng: &mut ChaCha8Rng, h: usize, w: usize, k: usize) -> ProbMap {
    let mut probs = Vec::with_capacity(h * w * k);
    for _ in 0..h * w {
        let top = rng.gen_range(0..k);
        let peak = rng.gen_range(0.5..1.0f32);
        probs.extend((0..k).map(|c| {
            if c == top {
                peak
            } else {
                (1.0 - peak) / (k - 1) as f32
            }
        }));
    }
    ProbMap::new(h, w, k, probs).expect("buffer matches shape")
}

/// Vertical stripes of `n` masks with every fifth column left uncovered.
pub fn striped_ids(h: usize, w: usize, n: usize) -> MaskIdMap {
    let ids = (0..h * w)
        .map(|p| {
            let c = p % w;
            if c.is_multiple_of(5) {
                0
            } else {
                (c * n / w) as u16 + 1
            }
        })
        .collect();
    MaskIdMap::from_ids(h, w, ids).expect("ids are dense")
}

pub struct LossFixture {
    pub z: DenseTensor,
    pub labels: LabelMap,
    pub bank: PrototypeBank,
}

pub fn loss_fixture(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize, k: usize) -> LossFixture {
    let z: Vec<f32> = (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let labels: Vec<u8> = (0..h * w).map(|p| (p % k) as u8).collect();
    let z = DenseTensor::new(vec![h, w, c], z).expect("buffer matches shape");
    let labels = LabelMap::new(h, w, labels).expect("buffer matches shape");
    let mut acc = PrototypeAccumulator::new(k, c);
    acc.accumulate(&z, &labels).expect("shapes agree");
    let bank = finalize_prototypes(&acc).expect("every class present");
    LossFixture { z, labels, bank }
}
