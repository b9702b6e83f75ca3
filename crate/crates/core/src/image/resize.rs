use super::GrayImage;
use crate::error::{Error, Result};

fn check_target(w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 {
        return Err(Error::Dimension(format!("target size must be positive, got {w}x{h}")));
    }
    Ok(())
}

/// Source coordinate and blend weight for a destination pixel, pixel-center aligned.
fn sample_axis(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, pos - lo as f64)
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_bilinear(img: &GrayImage, w: usize, h: usize) -> Result<GrayImage> {
    check_target(w, h)?;
    if w == img.width() && h == img.height() {
        return Ok(img.clone());
    }
    let xs: Vec<_> = (0..w).map(|x| sample_axis(x, img.width(), w)).collect();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1, fy) = sample_axis(y, img.height(), h);
        for &(x0, x1, fx) in &xs {
            let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
            let bottom = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(w, h, data)
}

/// Nearest-neighbour resampling, used for masks.
pub fn resize_nearest(img: &GrayImage, w: usize, h: usize) -> Result<GrayImage> {
    check_target(w, h)?;
    let pick = |d: usize, src: usize, dst: usize| {
        (((d as f64 + 0.5) * src as f64 / dst as f64) as usize).min(src - 1)
    };
    GrayImage::from_fn(w, h, |x, y| {
        img.get(pick(x, img.width(), w), pick(y, img.height(), h))
    })
}
