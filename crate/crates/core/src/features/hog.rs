use serde::{Deserialize, Serialize};

use super::{DescriptorKind, FeatureVector};
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogConfig {
    /// Cell side in pixels.
    pub cell: usize,
    /// Block side in cells.
    pub block: usize,
    /// Unsigned orientation bins over 0–180°.
    pub bins: usize,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self {
            cell: 8,
            block: 2,
            bins: 9,
        }
    }
}

impl HogConfig {
    pub fn descriptor_len(&self, width: usize, height: usize) -> usize {
        let (cx, cy) = (width / self.cell, height / self.cell);
        (cx + 1).saturating_sub(self.block) * (cy + 1).saturating_sub(self.block)
            * self.block
            * self.block
            * self.bins
    }
}

const NORM_EPS: f64 = 1e-6;

/// Histogram of oriented gradients.
///
/// Centered-difference gradients, unsigned orientation with linear vote
/// split between the two nearest bins (bin `b` centered at `b·180/bins`
/// degrees), overlapping blocks with stride one cell, L2 block normalization.
pub fn extract_hog(img: &GrayImage, cfg: &HogConfig) -> Result<FeatureVector> {
    let (w, h) = (img.width(), img.height());
    if cfg.cell == 0 || cfg.block == 0 || cfg.bins == 0 {
        return Err(Error::Config("hog cell, block and bins must be positive".into()));
    }
    if w % cfg.cell != 0 || h % cfg.cell != 0 {
        return Err(Error::Dimension(format!(
            "{w}x{h} image is not divisible into {} px cells",
            cfg.cell
        )));
    }
    let (cells_x, cells_y) = (w / cfg.cell, h / cfg.cell);
    if cells_x < cfg.block || cells_y < cfg.block {
        return Err(Error::Dimension("image is smaller than one block".into()));
    }

    let bins = cfg.bins;
    let bin_width = 180.0 / bins as f64;
    let mut cells = vec![0.0; cells_x * cells_y * bins];
    for y in 0..h {
        for x in 0..w {
            let gx = img.get((x + 1).min(w - 1), y) as f64 - img.get(x.saturating_sub(1), y) as f64;
            let gy = img.get(x, (y + 1).min(h - 1)) as f64 - img.get(x, y.saturating_sub(1)) as f64;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            if angle >= 180.0 {
                angle -= 180.0;
            }
            let pos = angle / bin_width;
            let lo = pos.floor();
            let frac = pos - lo;
            let lo = lo as usize % bins;
            let hi = (lo + 1) % bins;
            let base = ((y / cfg.cell) * cells_x + x / cfg.cell) * bins;
            cells[base + lo] += mag * (1.0 - frac);
            cells[base + hi] += mag * frac;
        }
    }

    let mut values = Vec::with_capacity(cfg.descriptor_len(w, h));
    let mut block = Vec::with_capacity(cfg.block * cfg.block * bins);
    for by in 0..=cells_y - cfg.block {
        for bx in 0..=cells_x - cfg.block {
            block.clear();
            for cy in by..by + cfg.block {
                for cx in bx..bx + cfg.block {
                    let base = (cy * cells_x + cx) * bins;
                    block.extend_from_slice(&cells[base..base + bins]);
                }
            }
            let norm = (block.iter().map(|v| v * v).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
            values.extend(block.iter().map(|v| v / norm));
        }
    }
    Ok(FeatureVector {
        values,
        kind: DescriptorKind::Hog,
        source: String::new(),
    })
}
