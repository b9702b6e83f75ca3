//! Immersion watershed (Vincent & Soille) on the gradient of a 3×3 mean
//! smoothed image, with 4-connectivity.

use std::collections::VecDeque;

use super::{relabel_by_key, LabelMap};
use crate::error::Result;
use crate::image::GrayImage;

/// Label given to ridge pixels by [`watershed_immersion`].
pub const WATERSHED_LINE: i32 = 0;
const INIT: i32 = -1;
const MASK: i32 = -2;

fn neighbors(p: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % w, p / w);
    [
        (x > 0).then(|| p - 1),
        (x + 1 < w).then(|| p + 1),
        (y > 0).then(|| p - w),
        (y + 1 < h).then(|| p + w),
    ]
    .into_iter()
    .flatten()
}

/// Floods `relief` from its regional minima. Returns one label per pixel:
/// basins are numbered from 1 in order of discovery, ridge pixels get
/// [`WATERSHED_LINE`].
pub fn watershed_immersion(relief: &[u32], width: usize, height: usize) -> Vec<i32> {
    let n = relief.len();
    assert_eq!(n, width * height, "relief size must match dimensions");
    let mut labels = vec![INIT; n];
    let mut dist = vec![0u32; n];
    let mut queue: VecDeque<Option<usize>> = VecDeque::new();
    let mut current_label = 0;

    // counting sort by level
    let max_level = relief.iter().copied().max().unwrap_or(0) as usize;
    let mut starts = vec![0usize; max_level + 2];
    for &v in relief {
        starts[v as usize + 1] += 1;
    }
    for i in 1..starts.len() {
        starts[i] += starts[i - 1];
    }
    let mut sorted = vec![0usize; n];
    let mut fill = starts.clone();
    for (p, &v) in relief.iter().enumerate() {
        sorted[fill[v as usize]] = p;
        fill[v as usize] += 1;
    }

    for level in 0..=max_level {
        let level_pixels = &sorted[starts[level]..starts[level + 1]];
        if level_pixels.is_empty() {
            continue;
        }
        for &p in level_pixels {
            labels[p] = MASK;
            if neighbors(p, width, height).any(|q| labels[q] >= WATERSHED_LINE) {
                dist[p] = 1;
                queue.push_back(Some(p));
            }
        }
        let mut current_dist = 1;
        queue.push_back(None);
        loop {
            let p = match queue.pop_front().flatten() {
                Some(p) => p,
                None => {
                    if queue.is_empty() {
                        break;
                    }
                    queue.push_back(None);
                    current_dist += 1;
                    match queue.pop_front().flatten() {
                        Some(p) => p,
                        None => continue,
                    }
                }
            };
            for q in neighbors(p, width, height) {
                if dist[q] < current_dist && labels[q] >= WATERSHED_LINE {
                    if labels[q] > 0 {
                        if labels[p] == MASK || labels[p] == WATERSHED_LINE {
                            labels[p] = labels[q];
                        } else if labels[p] != labels[q] {
                            labels[p] = WATERSHED_LINE;
                        }
                    } else if labels[p] == MASK {
                        labels[p] = WATERSHED_LINE;
                    }
                } else if labels[q] == MASK && dist[q] == 0 {
                    dist[q] = current_dist + 1;
                    queue.push_back(Some(q));
                }
            }
        }
        // remaining masked pixels at this level are new minima
        for &p in level_pixels {
            dist[p] = 0;
            if labels[p] == MASK {
                current_label += 1;
                labels[p] = current_label;
                queue.push_back(Some(p));
                while let Some(Some(q)) = queue.pop_front() {
                    for r in neighbors(q, width, height) {
                        if labels[r] == MASK {
                            labels[r] = current_label;
                            queue.push_back(Some(r));
                        }
                    }
                }
            }
        }
    }
    labels
}

fn mean_smooth(img: &GrayImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for dy in [-1isize, 0, 1] {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in [-1isize, 0, 1] {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    s += img.get(xx, yy) as f64;
                }
            }
            out[y * w + x] = s / 9.0;
        }
    }
    out
}

/// Central-difference gradient magnitude of the smoothed image, rounded to
/// integer levels. This is the relief that [`segment_watershed`] floods.
pub fn watershed_relief(img: &GrayImage) -> Vec<u32> {
    let (w, h) = (img.width(), img.height());
    let s = mean_smooth(img);
    let mut relief = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let at = |xx: usize, yy: usize| s[yy * w + xx];
            let gx = 0.5 * (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y));
            let gy = 0.5 * (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1)));
            relief.push((gx * gx + gy * gy).sqrt().round() as u32);
        }
    }
    relief
}

/// Watershed segmentation. Each catchment basin becomes a segment; ridge
/// pixels join the adjacent basin whose mean intensity is closest to theirs.
pub fn segment_watershed(img: &GrayImage) -> Result<LabelMap> {
    let (w, h) = (img.width(), img.height());
    let mut labels = watershed_immersion(&watershed_relief(img), w, h);
    let basins = labels.iter().copied().max().unwrap_or(0).max(1) as usize;

    let mut sums = vec![(0.0, 0usize); basins];
    for (&l, &v) in labels.iter().zip(img.data()) {
        if l > 0 {
            sums[l as usize - 1].0 += v as f64;
            sums[l as usize - 1].1 += 1;
        }
    }
    let basin_mean: Vec<f64> = sums
        .iter()
        .map(|&(s, n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();

    let mut pending: Vec<usize> = (0..labels.len()).filter(|&p| labels[p] <= 0).collect();
    while !pending.is_empty() {
        let snapshot = labels.clone();
        let before = pending.len();
        pending.retain(|&p| {
            let v = img.data()[p] as f64;
            let choice = neighbors(p, w, h)
                .map(|q| snapshot[q])
                .filter(|&l| l > 0)
                .min_by(|&a, &b| {
                    let da = (basin_mean[a as usize - 1] - v).abs();
                    let db = (basin_mean[b as usize - 1] - v).abs();
                    da.total_cmp(&db).then(a.cmp(&b))
                });
            match choice {
                Some(l) => {
                    labels[p] = l;
                    false
                }
                None => true,
            }
        });
        if pending.len() == before {
            // isolated ridge with no basin anywhere: only possible without minima
            for &p in &pending {
                labels[p] = 1;
            }
            break;
        }
    }

    let raw: Vec<usize> = labels.iter().map(|&l| l as usize - 1).collect();
    let mut final_sums = vec![(0.0, 0usize); basins];
    for (&r, &v) in raw.iter().zip(img.data()) {
        final_sums[r].0 += v as f64;
        final_sums[r].1 += 1;
    }
    let means: Vec<f64> = final_sums
        .iter()
        .map(|&(s, n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect();
    relabel_by_key(w, h, &raw, &means)
}
