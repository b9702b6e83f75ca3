use super::{relabel_by_key, LabelMap};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::ngn::{train_ngn_flat, NgnConfig};

/// Vector-quantization segmentation: trains a `k`-neuron gas on the pixel
/// intensities (scaled to `[0, 1]`) and labels each pixel with its nearest
/// neuron, ordered by neuron intensity.
pub fn segment_ngn(img: &GrayImage, k: usize, cfg: &NgnConfig) -> Result<LabelMap> {
    if k == 0 {
        return Err(Error::Config("segment count must be >= 1".into()));
    }
    let cfg = NgnConfig {
        neuron_count: k,
        ..cfg.clone()
    };
    let codebook = train_ngn_flat(&img.normalized(), 1, &cfg)?;
    let levels: Vec<f64> = codebook.weights().map(|w| w[0]).collect();

    // nearest neuron per intensity level; equal distance goes to the darker neuron
    let mut by_level = [0usize; 256];
    for (v, slot) in by_level.iter_mut().enumerate() {
        let x = v as f64 / 255.0;
        let mut best = (f64::INFINITY, f64::INFINITY, 0);
        for (i, &w) in levels.iter().enumerate() {
            let cand = ((x - w).abs(), w, i);
            if cand.0 < best.0 || (cand.0 == best.0 && (cand.1, cand.2) < (best.1, best.2)) {
                best = cand;
            }
        }
        *slot = best.2;
    }
    let raw: Vec<usize> = img.data().iter().map(|&v| by_level[v as usize]).collect();
    relabel_by_key(img.width(), img.height(), &raw, &levels)
}
