use std::collections::VecDeque;

use super::{check_rgb, SeedsParams, SuperpixelMap};
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Partitions an H×W×3 `uint8` image into at most `params.num_superpixels`
/// 4-connected regions.
///
/// Deterministic: the same image and parameters always give the same map.
pub fn seeds_partition(image: &DenseTensor, params: &SeedsParams) -> Result<SuperpixelMap> {
    params.validate()?;
    let (height, width, rgb) = check_rgb(image)?;
    if params.num_superpixels > height * width {
        return Err(Error::ImageTooSmall {
            width,
            height,
            reason: format!(
                "{} superpixels requested for {} pixels",
                params.num_superpixels,
                height * width
            ),
        });
    }

    let (nx, ny) = choose_grid(width, height, params.num_superpixels);
    let col_bounds = split(width, nx);
    let row_bounds = split(height, ny);

    let mut state = State::new(width, height, rgb, params.bins_per_channel, nx * ny);
    for y in 0..height {
        let cy = cell_of(&row_bounds, y);
        for x in 0..width {
            let cx = cell_of(&col_bounds, x);
            state.labels[y * width + x] = (cy * nx + cx) as u32;
        }
    }
    state.rebuild_histograms();

    for level in 1..params.levels {
        let subdiv = 1usize << level.min(16);
        let cols = subdivide(&col_bounds, subdiv);
        let rows = subdivide(&row_bounds, subdiv);
        state.block_sweeps(&cols, &rows, params.iterations);
    }
    state.pixel_sweeps(params.iterations, params.smoothing_prior);

    let labels = enforce_connectivity(&state.labels, width, height);
    let ids = labels.into_iter().map(|l| l as u16).collect();
    SuperpixelMap::new(height, width, ids)
}

/// Picks an `nx × ny` grid with `nx * ny <= k`, `nx <= width`, `ny <= height`.
///
/// Prefers grids whose cells have aspect ratio within `[1/2, 2]`, then the
/// largest cell count, then the squarest cells, then more columns.
pub(crate) fn choose_grid(width: usize, height: usize, k: usize) -> (usize, usize) {
    let mut best: Option<(bool, usize, f64, usize, usize)> = None;
    for ny in 1..=height.min(k) {
        let nx = (k / ny).min(width);
        if nx == 0 {
            continue;
        }
        let aspect = (width as f64 / nx as f64) / (height as f64 / ny as f64);
        let skew = aspect.ln().abs();
        let balanced = skew <= 2f64.ln() + 1e-12;
        let key = (balanced, nx * ny, skew, nx, ny);
        let better = match &best {
            None => true,
            Some(b) => {
                (key.0, key.1) > (b.0, b.1)
                    || ((key.0, key.1) == (b.0, b.1)
                        && (key.2 < b.2 - 1e-12 || ((key.2 - b.2).abs() <= 1e-12 && key.3 > b.3)))
            }
        };
        if better {
            best = Some(key);
        }
    }
    let (_, _, _, nx, ny) = best.expect("1x1 grid always fits");
    (nx, ny)
}

/// Boundaries `floor(i * len / parts)` for `i` in `0..=parts`.
fn split(len: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| i * len / parts).collect()
}

/// Splits every interval of `bounds` into `subdiv` parts, dropping empty ones.
fn subdivide(bounds: &[usize], subdiv: usize) -> Vec<usize> {
    let mut out = vec![bounds[0]];
    for pair in bounds.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        for j in 1..=subdiv {
            let b = lo + j * (hi - lo) / subdiv;
            if b > *out.last().expect("nonempty") {
                out.push(b);
            }
        }
    }
    out
}

fn cell_of(bounds: &[usize], v: usize) -> usize {
    bounds.partition_point(|&b| b <= v) - 1
}

struct State {
    width: usize,
    height: usize,
    nbins: usize,
    bins: Vec<u32>,
    labels: Vec<u32>,
    hist: Vec<u32>,
    size: Vec<u32>,
}

impl State {
    fn new(
        width: usize,
        height: usize,
        rgb: &[u8],
        bins_per_channel: usize,
        regions: usize,
    ) -> Self {
        let b = bins_per_channel;
        let quant = |v: u8| usize::from(v) * b / 256;
        let bins = rgb
            .chunks_exact(3)
            .map(|px| ((quant(px[0]) * b + quant(px[1])) * b + quant(px[2])) as u32)
            .collect();
        let nbins = b * b * b;
        State {
            width,
            height,
            nbins,
            bins,
            labels: vec![0; width * height],
            hist: vec![0; regions * nbins],
            size: vec![0; regions],
        }
    }

    fn rebuild_histograms(&mut self) {
        self.hist.iter_mut().for_each(|h| *h = 0);
        self.size.iter_mut().for_each(|s| *s = 0);
        for (p, &l) in self.labels.iter().enumerate() {
            let l = l as usize;
            self.hist[l * self.nbins + self.bins[p] as usize] += 1;
            self.size[l] += 1;
        }
    }

    fn region_hist(&self, label: u32) -> &[u32] {
        let start = label as usize * self.nbins;
        &self.hist[start..start + self.nbins]
    }

    /// Block-exchange sweeps on the block grid given by `cols × rows`.
    fn block_sweeps(&mut self, cols: &[usize], rows: &[usize], iterations: usize) {
        let bw = cols.len() - 1;
        let bh = rows.len() - 1;
        let nblocks = bw * bh;

        // sparse per-block histograms
        let mut block_hist: Vec<Vec<(u32, u32)>> = Vec::with_capacity(nblocks);
        let mut block_size = Vec::with_capacity(nblocks);
        let mut block_label = Vec::with_capacity(nblocks);
        let mut dense = vec![0u32; self.nbins];
        for by in 0..bh {
            for bx in 0..bw {
                let mut touched = Vec::new();
                for y in rows[by]..rows[by + 1] {
                    for x in cols[bx]..cols[bx + 1] {
                        let bin = self.bins[y * self.width + x];
                        if dense[bin as usize] == 0 {
                            touched.push(bin);
                        }
                        dense[bin as usize] += 1;
                    }
                }
                touched.sort_unstable();
                block_hist.push(
                    touched
                        .iter()
                        .map(|&b| (b, std::mem::take(&mut dense[b as usize])))
                        .collect(),
                );
                block_size.push(((rows[by + 1] - rows[by]) * (cols[bx + 1] - cols[bx])) as u32);
                block_label.push(self.labels[rows[by] * self.width + cols[bx]]);
            }
        }

        for _ in 0..iterations {
            let mut changed = false;
            for by in 0..bh {
                for bx in 0..bw {
                    let b = by * bw + bx;
                    let current = block_label[b];
                    if self.size[current as usize] <= block_size[b] {
                        continue;
                    }
                    let mut candidates = [u32::MAX; 4];
                    let mut n = 0;
                    let neighbors = [
                        (bx > 0).then(|| b - 1),
                        (bx + 1 < bw).then(|| b + 1),
                        (by > 0).then(|| b - bw),
                        (by + 1 < bh).then(|| b + bw),
                    ];
                    for nb in neighbors.into_iter().flatten() {
                        let l = block_label[nb];
                        if l != current && !candidates[..n].contains(&l) {
                            candidates[n] = l;
                            n += 1;
                        }
                    }
                    if n == 0 {
                        continue;
                    }
                    candidates[..n].sort_unstable();

                    let bh_sparse = &block_hist[b];
                    let bsize = block_size[b];
                    let stay = intersection_without(
                        bh_sparse,
                        bsize,
                        self.region_hist(current),
                        self.size[current as usize],
                    );
                    let mut best = (stay, current);
                    for &cand in &candidates[..n] {
                        let score = intersection(
                            bh_sparse,
                            bsize,
                            self.region_hist(cand),
                            self.size[cand as usize],
                        );
                        if score > best.0 {
                            best = (score, cand);
                        }
                    }
                    if best.1 != current {
                        let target = best.1;
                        for &(bin, count) in bh_sparse {
                            self.hist[current as usize * self.nbins + bin as usize] -= count;
                            self.hist[target as usize * self.nbins + bin as usize] += count;
                        }
                        self.size[current as usize] -= bsize;
                        self.size[target as usize] += bsize;
                        block_label[b] = target;
                        for y in rows[by]..rows[by + 1] {
                            for x in cols[bx]..cols[bx + 1] {
                                self.labels[y * self.width + x] = target;
                            }
                        }
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Boundary-pixel sweeps with the 3×3 smoothing prior.
    fn pixel_sweeps(&mut self, iterations: usize, prior: u32) {
        let (w, h) = (self.width as isize, self.height as isize);
        let prior = f64::from(prior);
        for _ in 0..iterations {
            let mut changed = false;
            for y in 0..h {
                for x in 0..w {
                    let p = (y * w + x) as usize;
                    let current = self.labels[p];
                    if self.size[current as usize] <= 1 {
                        continue;
                    }
                    let mut candidates = [u32::MAX; 4];
                    let mut n = 0;
                    for (dx, dy) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                        let (qx, qy) = (x + dx, y + dy);
                        if qx < 0 || qy < 0 || qx >= w || qy >= h {
                            continue;
                        }
                        let l = self.labels[(qy * w + qx) as usize];
                        if l != current && !candidates[..n].contains(&l) {
                            candidates[n] = l;
                            n += 1;
                        }
                    }
                    if n == 0 || !self.is_simple(x, y, current) {
                        continue;
                    }
                    candidates[..n].sort_unstable();

                    let bin = self.bins[p] as usize;
                    let neighborhood = self.neighborhood(x, y);
                    let smooth = |label: u32| {
                        prior * neighborhood.iter().filter(|&&l| l == label).count() as f64 / 8.0
                    };
                    let c = current as usize;
                    let stay = f64::from(self.hist[c * self.nbins + bin] - 1)
                        / f64::from(self.size[c] - 1)
                        + smooth(current);
                    let mut best = (stay, current);
                    for &cand in &candidates[..n] {
                        let k = cand as usize;
                        let score = f64::from(self.hist[k * self.nbins + bin])
                            / f64::from(self.size[k])
                            + smooth(cand);
                        if score > best.0 {
                            best = (score, cand);
                        }
                    }
                    if best.1 != current {
                        let t = best.1 as usize;
                        self.hist[c * self.nbins + bin] -= 1;
                        self.hist[t * self.nbins + bin] += 1;
                        self.size[c] -= 1;
                        self.size[t] += 1;
                        self.labels[p] = best.1;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    /// Labels of the 8-neighborhood; out-of-image cells are `u32::MAX`.
    fn neighborhood(&self, x: isize, y: isize) -> [u32; 8] {
        let mut out = [u32::MAX; 8];
        let mut i = 0;
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (qx, qy) = (x + dx, y + dy);
                if qx >= 0 && qy >= 0 && qx < self.width as isize && qy < self.height as isize {
                    out[i] = self.labels[(qy * self.width as isize + qx) as usize];
                }
                i += 1;
            }
        }
        out
    }

    /// True when removing pixel `(x, y)` from `label` keeps the label's
    /// 4-neighbors of the pixel connected through the surrounding 3×3 window.
    fn is_simple(&self, x: isize, y: isize, label: u32) -> bool {
        // window cells indexed 0..9 row-major; 4 is the center
        let nb = self.neighborhood(x, y);
        let mut inside = [false; 9];
        for (slot, &l) in [0, 1, 2, 3, 5, 6, 7, 8].iter().zip(&nb) {
            inside[*slot] = l == label;
        }
        let four = [1usize, 3, 5, 7];
        let Some(&start) = four.iter().find(|&&c| inside[c]) else {
            return true;
        };
        let mut seen = [false; 9];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(c) = stack.pop() {
            let (cx, cy) = (c % 3, c / 3);
            let adj = [
                (cx > 0).then(|| c - 1),
                (cx < 2).then(|| c + 1),
                (cy > 0).then(|| c - 3),
                (cy < 2).then(|| c + 3),
            ];
            for n in adj.into_iter().flatten() {
                if n != 4 && inside[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        four.iter().all(|&c| !inside[c] || seen[c])
    }
}

/// Normalized histogram intersection of a sparse block histogram with a
/// dense region histogram.
fn intersection(block: &[(u32, u32)], block_size: u32, region: &[u32], region_size: u32) -> f64 {
    let bs = f64::from(block_size);
    let rs = f64::from(region_size);
    block
        .iter()
        .map(|&(bin, c)| (f64::from(c) / bs).min(f64::from(region[bin as usize]) / rs))
        .sum()
}

/// Like [`intersection`] but against the region with the block removed.
fn intersection_without(
    block: &[(u32, u32)],
    block_size: u32,
    region: &[u32],
    region_size: u32,
) -> f64 {
    let bs = f64::from(block_size);
    let rs = f64::from(region_size - block_size);
    block
        .iter()
        .map(|&(bin, c)| {
            let rest = region[bin as usize] - c;
            (f64::from(c) / bs).min(f64::from(rest) / rs)
        })
        .sum()
}

/// Keeps the largest 4-connected component of each label and hands every
/// other fragment to the adjacent region sharing the longest boundary.
/// Returns labels renumbered densely by first row-major appearance.
pub(crate) fn enforce_connectivity(labels: &[u32], width: usize, height: usize) -> Vec<u32> {
    let n = width * height;
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<(u32, Vec<usize>)> = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if comp[seed] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let label = labels[seed];
        let mut pixels = Vec::new();
        comp[seed] = id;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            pixels.push(p);
            for q in neighbors4(p, width, height).into_iter().flatten() {
                if comp[q] == usize::MAX && labels[q] == label {
                    comp[q] = id;
                    queue.push_back(q);
                }
            }
        }
        comps.push((label, pixels));
    }

    let max_label = labels.iter().copied().max().unwrap_or(0) as usize;
    let mut main: Vec<Option<usize>> = vec![None; max_label + 1];
    for (id, (label, pixels)) in comps.iter().enumerate() {
        let slot = &mut main[*label as usize];
        match slot {
            Some(m) if comps[*m].1.len() >= pixels.len() => {}
            _ => *slot = Some(id),
        }
    }

    let mut final_label: Vec<Option<u32>> = vec![None; comps.len()];
    for (label, m) in main.iter().enumerate() {
        if let Some(m) = m {
            final_label[*m] = Some(label as u32);
        }
    }
    let mut pending: Vec<usize> = (0..comps.len())
        .filter(|&id| final_label[id].is_none())
        .collect();
    while !pending.is_empty() {
        let mut still = Vec::new();
        let mut progressed = false;
        for &id in &pending {
            let mut shared: Vec<(u32, usize)> = Vec::new();
            for &p in &comps[id].1 {
                for q in neighbors4(p, width, height).into_iter().flatten() {
                    if comp[q] == id {
                        continue;
                    }
                    if let Some(l) = final_label[comp[q]] {
                        match shared.iter_mut().find(|(sl, _)| *sl == l) {
                            Some((_, c)) => *c += 1,
                            None => shared.push((l, 1)),
                        }
                    }
                }
            }
            let best = shared
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
            match best {
                Some((l, _)) => {
                    final_label[id] = Some(l);
                    progressed = true;
                }
                None => still.push(id),
            }
        }
        assert!(progressed, "fragments must touch a resolved region");
        pending = still;
    }

    let mut remap: Vec<Option<u32>> = vec![None; max_label + 1];
    let mut next = 0u32;
    (0..n)
        .map(|p| {
            let l = final_label[comp[p]].expect("all resolved") as usize;
            *remap[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

fn neighbors4(p: usize, width: usize, height: usize) -> [Option<usize>; 4] {
    let (x, y) = (p % width, p / width);
    [
        (x > 0).then(|| p - 1),
        (x + 1 < width).then(|| p + 1),
        (y > 0).then(|| p - width),
        (y + 1 < height).then(|| p + width),
    ]
}
