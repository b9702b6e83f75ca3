use super::{DescriptorKind, FeatureVector};
use crate::error::Result;
use crate::firefly::{fa_enhance, FaConfig};
use crate::image::GrayImage;
use crate::ngn::{train_ngn_flat, NgnConfig};

/// Neural gas row descriptor.
///
/// Each image row (scaled to `[0, 1]`) is one `width`-dimensional sample.
/// After training, the neuron weight vectors are summed coordinate-wise, so
/// the descriptor length equals the image width regardless of neuron count.
pub fn extract_ngn_features(
    img: &GrayImage,
    cfg: &NgnConfig,
    enhance: bool,
    fa_cfg: &FaConfig,
) -> Result<FeatureVector> {
    let enhanced;
    let img = if enhance {
        enhanced = fa_enhance(img, fa_cfg)?.image;
        &enhanced
    } else {
        img
    };
    let codebook = train_ngn_flat(&img.normalized(), img.width(), cfg)?;
    let mut values = vec![0.0; img.width()];
    for w in codebook.weights() {
        for (acc, &v) in values.iter_mut().zip(w) {
            *acc += v;
        }
    }
    Ok(FeatureVector {
        values,
        kind: DescriptorKind::Ngn,
        source: String::new(),
    })
}
