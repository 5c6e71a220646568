#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maskalign::{encode_rle, save_tensor, DenseTensor, LabelMap, MaskSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub const BIN: &str = env!("CARGO_BIN_EXE_maskalign");

/// Runs the binary with `args`, logging at warn level to keep output short.
pub fn maskalign(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("MASKALIGN_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Rectangles of one class each, drawn over a class-0 background.
struct Scene {
    h: usize,
    w: usize,
    labels: Vec<u8>,
}

impl Scene {
    fn random(rng: &mut ChaCha8Rng, h: usize, w: usize, classes: u8) -> Self {
        let mut labels = vec![0u8; h * w];
        // sky band over the top third
        labels[..(h / 3) * w].fill(1);
        for _ in 0..rng.gen_range(2..5) {
            let class = rng.gen_range(2..classes);
            let (r0, c0) = (rng.gen_range(0..h - 4), rng.gen_range(0..w - 4));
            let (r1, c1) = (rng.gen_range(r0 + 3..h), rng.gen_range(c0 + 3..w));
            for r in r0..r1 {
                labels[r * w + c0..r * w + c1].fill(class);
            }
        }
        Scene { h, w, labels }
    }

    fn region(&self, class: u8) -> Vec<bool> {
        self.labels.iter().map(|&l| l == class).collect()
    }
}

fn palette(class: u8) -> [u8; 3] {
    let c = u32::from(class);
    [
        (c * 67 % 256) as u8,
        (c * 151 % 256) as u8,
        (c * 29 % 256) as u8,
    ]
}

/// Writes one synthetic image's inputs under `dir` and returns its
/// manifest record.
pub fn write_image(dir: &Path, stem: &str, seed: u64, classes: u8) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (rng.gen_range(32..=48), rng.gen_range(40..=64));
    let scene = Scene::random(&mut rng, h, w, classes);
    let k = usize::from(classes);

    let rgb: Vec<u8> = scene
        .labels
        .iter()
        .flat_map(|&l| palette(l).map(|v| v.saturating_add(rng.gen_range(0..12))))
        .collect();
    let image = dir.join(format!("{stem}.npy"));
    save_tensor(&DenseTensor::new(vec![h, w, 3], rgb).unwrap(), &image).unwrap();

    let gt = dir.join(format!("{stem}_gt.png"));
    let mut gt_labels = scene.labels.clone();
    for l in gt_labels.iter_mut() {
        if rng.gen_bool(0.02) {
            *l = 255;
        }
    }
    LabelMap::new(h, w, gt_labels)
        .unwrap()
        .save_png(&gt)
        .unwrap();

    let mut probs = Vec::with_capacity(h * w * k);
    for &l in &scene.labels {
        let roll: f64 = rng.gen();
        let (top_class, top) = if roll < 0.55 {
            (l, rng.gen_range(0.992..1.0f32))
        } else if roll < 0.85 {
            (l, rng.gen_range(0.5..0.95f32))
        } else {
            (rng.gen_range(0..classes), rng.gen_range(0.4..0.999f32))
        };
        let rest = (1.0 - top) / (k - 1) as f32;
        probs.extend((0..classes).map(|c| if c == top_class { top } else { rest }));
    }
    let probmap = dir.join(format!("{stem}_prob.npy"));
    save_tensor(&DenseTensor::new(vec![h, w, k], probs).unwrap(), &probmap).unwrap();

    // one candidate per present class plus overlapping random boxes
    let mut masks = Vec::new();
    let mut present: Vec<u8> = scene.labels.clone();
    present.sort_unstable();
    present.dedup();
    for &c in &present {
        masks.push(encode_rle(&scene.region(c), h, w).unwrap());
    }
    for _ in 0..rng.gen_range(2..6) {
        let (r0, c0) = (rng.gen_range(0..h - 2), rng.gen_range(0..w - 2));
        let (r1, c1) = (rng.gen_range(r0 + 1..h), rng.gen_range(c0 + 1..w));
        let grid: Vec<bool> = (0..h * w)
            .map(|p| (r0..r1).contains(&(p / w)) && (c0..c1).contains(&(p % w)))
            .collect();
        masks.push(encode_rle(&grid, h, w).unwrap());
    }
    let masks_path = dir.join(format!("{stem}_masks.json"));
    std::fs::write(&masks_path, MaskSet::new(h, w, masks).unwrap().to_json()).unwrap();

    // features at quarter resolution: class direction plus noise
    let (fh, fw, fc) = (h / 4, w / 4, 8);
    let mut feats = Vec::with_capacity(fh * fw * fc);
    for i in 0..fh {
        for j in 0..fw {
            let l = scene.labels[(i * 4) * w + j * 4];
            for d in 0..fc {
                let base = if d == usize::from(l) % fc { 2.0 } else { 0.2 };
                feats.push(base + rng.gen_range(-0.3..0.3f32));
            }
        }
    }
    let features = dir.join(format!("{stem}_feat.npy"));
    save_tensor(
        &DenseTensor::new(vec![fh, fw, fc], feats).unwrap(),
        &features,
    )
    .unwrap();

    let pred = dir.join(format!("{stem}_pred.png"));
    let pred_labels: Vec<u8> = scene
        .labels
        .iter()
        .map(|&l| {
            if rng.gen_bool(0.1) {
                rng.gen_range(0..classes)
            } else {
                l
            }
        })
        .collect();
    LabelMap::new(h, w, pred_labels)
        .unwrap()
        .save_png(&pred)
        .unwrap();

    json!({
        "image": file_name(&image),
        "probmap": file_name(&probmap),
        "masks": file_name(&masks_path),
        "features": file_name(&features),
        "labels": file_name(&gt),
        "prediction": file_name(&pred),
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

/// `n` synthetic images and a manifest listing them, all under `dir`.
pub fn write_dataset(dir: &Path, n: usize, seed: u64, classes: u8) -> PathBuf {
    let records: Vec<Value> = (0..n)
        .map(|i| write_image(dir, &format!("img{i:02}"), seed + i as u64, classes))
        .collect();
    let manifest = dir.join("manifest.json");
    std::fs::write(&manifest, serde_json::to_string_pretty(&records).unwrap()).unwrap();
    manifest
}

/// Every file under `root`, as sorted relative paths.
pub fn tree(root: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
