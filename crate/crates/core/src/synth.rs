//! Seeded synthetic images and point sets with known ground truth.

use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{DatasetManifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::image::{save_png_gray, GrayImage};
use crate::segment::BwMask;

/// Region intensities of [`band_image`], darkest first.
pub const BAND_LEVELS: [u8; 4] = [40, 100, 160, 220];
pub const BAND_NOISE_SIGMA: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub id: String,
    pub image: GrayImage,
    pub label: u8,
    pub mask: Option<BwMask>,
}

fn noisy(v: f64, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> u8 {
    (v + noise.sample(rng)).round().clamp(0.0, 255.0) as u8
}

/// Four horizontal intensity bands in seeded random order with wavy
/// boundaries, plus Gaussian noise. The mask marks the brightest band.
pub fn band_image(size: usize, seed: u64) -> Result<SynthSample> {
    if size < 16 {
        return Err(Error::Config("synthetic images need size >= 16".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let mut order = [0usize, 1, 2, 3];
    order.shuffle(&mut rng);
    let heights: Vec<f64> = (0..4).map(|_| rng.gen_range(0.15..0.35)).collect();
    let total: f64 = heights.iter().sum();
    let mut edges = [0.0; 3];
    let mut acc = 0.0;
    for (e, h) in edges.iter_mut().zip(&heights) {
        acc += h / total * s;
        *e = acc;
    }
    let amp = s * rng.gen_range(0.0..0.03);
    let period = s * rng.gen_range(0.3..1.0);
    let phase = rng.gen_range(0.0..2.0 * PI);

    let noise = Normal::new(0.0, BAND_NOISE_SIGMA).expect("valid sigma");
    let mut data = Vec::with_capacity(size * size);
    let mut bits = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let py = y as f64 + 0.5 + amp * (2.0 * PI * (x as f64 + 0.5) / period + phase).sin();
            let band = edges.iter().filter(|&&e| py >= e).count();
            let level = order[band];
            bits.push(level == 3);
            data.push(noisy(BAND_LEVELS[level] as f64, &noise, &mut rng));
        }
    }
    Ok(SynthSample {
        id: format!("band_{seed:04}"),
        image: GrayImage::new(size, size, data)?,
        label: 1,
        mask: Some(BwMask::new(size, size, bits)?),
    })
}

/// `n` band images with seeds `seed..seed+n`.
pub fn band_dataset(n: usize, size: usize, seed: u64) -> Result<Vec<SynthSample>> {
    (0..n as u64).map(|i| band_image(size, seed + i)).collect()
}

/// Two-class texture: a bright vertical stripe in the left third (class 0)
/// or the right third (class 1), a horizontal stripe at a random height in
/// both classes, and Gaussian noise.
pub fn texture_image(class: u8, size: usize, seed: u64) -> Result<SynthSample> {
    if size < 16 {
        return Err(Error::Config("synthetic images need size >= 16".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let centre = if class == 0 { 0.25 } else { 0.75 } + rng.gen_range(-0.06..0.06);
    let half = s * rng.gen_range(0.07..0.11);
    let (v0, v1) = (centre * s - half, centre * s + half);
    let h_centre = s * rng.gen_range(0.15..0.85);
    let h_half = s * rng.gen_range(0.05..0.1);
    let base = rng.gen_range(70.0..110.0);
    let stripe = base + rng.gen_range(60.0..90.0);
    let noise = Normal::new(0.0, 18.0).expect("valid sigma");
    let image = GrayImage::from_fn(size, size, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let v = if (v0..v1).contains(&px) || (py - h_centre).abs() < h_half {
            stripe
        } else {
            base
        };
        noisy(v, &noise, &mut rng)
    })?;
    Ok(SynthSample {
        id: format!("texture_{class}_{seed:04}"),
        image,
        label: class,
        mask: None,
    })
}

/// `n` texture images alternating class 0 and 1.
pub fn texture_dataset(n: usize, size: usize, seed: u64) -> Result<Vec<SynthSample>> {
    (0..n as u64)
        .map(|i| texture_image((i % 2) as u8, size, seed.wrapping_mul(1_000_003).wrapping_add(i)))
        .collect()
}

/// 2-D mixture: two thirds on a noisy unit ring, one third in a Gaussian
/// blob centred at (2.5, 0).
pub fn ring_blob_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radial = Normal::new(0.0, 0.06).expect("valid sigma");
    let blob = Normal::new(0.0, 0.3).expect("valid sigma");
    (0..n)
        .map(|i| {
            if i % 3 == 2 {
                vec![2.5 + blob.sample(&mut rng), blob.sample(&mut rng)]
            } else {
                let t = rng.gen_range(0.0..2.0 * PI);
                let r = 1.0 + radial.sample(&mut rng);
                vec![r * t.cos(), r * t.sin()]
            }
        })
        .collect()
}

/// Two Gaussian intensity modes split by a random vertical boundary.
pub fn bimodal_image(size: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = rng.gen_range(30.0..110.0);
    let hi = rng.gen_range(140.0..225.0);
    let split = rng.gen_range(size / 4..3 * size / 4);
    let noise = Normal::new(0.0, rng.gen_range(5.0..20.0)).expect("valid sigma");
    GrayImage::from_fn(size, size, |x, _| noisy(if x < split { lo } else { hi }, &noise, &mut rng))
}

/// Sparse random histogram with at least two occupied levels.
pub fn random_histogram(seed: u64) -> [u64; 256] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = [0u64; 256];
    let occupied = rng.gen_range(2..=24);
    let mut filled = 0;
    while filled < occupied {
        let level = rng.gen_range(0..256);
        if hist[level] == 0 {
            hist[level] = rng.gen_range(1..=500);
            filled += 1;
        }
    }
    hist
}

/// Writes images (and masks, when present) as PNG files under `dir` and
/// returns the manifest, also saved as `dir/manifest.csv`.
pub fn write_dataset(samples: &[SynthSample], dir: impl AsRef<Path>, name: &str) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(samples.len());
    for s in samples {
        let image = dir.join(format!("{}.png", s.id));
        save_png_gray(&s.image, &image)?;
        let mask = match &s.mask {
            Some(m) => {
                let p = dir.join(format!("{}_mask.png", s.id));
                save_png_gray(&m.to_gray(), &p)?;
                Some(p)
            }
            None => None,
        };
        entries.push(ManifestEntry {
            image,
            label: s.label,
            mask,
        });
    }
    let manifest = DatasetManifest {
        name: name.to_string(),
        root: dir.to_path_buf(),
        entries,
    };
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_image_has_four_levels_and_mask() {
        let s = band_image(128, 3).unwrap();
        let mask = s.mask.unwrap();
        assert!(mask.count_positive() > 100);
        let inside: Vec<f64> = s
            .image
            .data()
            .iter()
            .zip(mask.bits())
            .filter(|(_, &b)| b)
            .map(|(&v, _)| v as f64)
            .collect();
        let mean = inside.iter().sum::<f64>() / inside.len() as f64;
        assert!((mean - 220.0).abs() < 2.0);
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(band_image(64, 9).unwrap().image, band_image(64, 9).unwrap().image);
        assert_eq!(ring_blob_points(700, 1), ring_blob_points(700, 1));
        assert_eq!(random_histogram(5), random_histogram(5));
        let t = texture_dataset(4, 32, 0).unwrap();
        assert_eq!(t.iter().map(|s| s.label).collect::<Vec<_>>(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn histograms_have_two_levels() {
        for seed in 0..50 {
            assert!(random_histogram(seed).iter().filter(|&&c| c > 0).count() >= 2);
        }
    }

    #[test]
    fn dataset_round_trips_through_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let samples = band_dataset(2, 32, 0).unwrap();
        let written = write_dataset(&samples, dir.path(), "bands").unwrap();
        let loaded = DatasetManifest::load(dir.path().join("manifest.csv")).unwrap();
        assert_eq!(loaded.entries, written.entries);
        let img = crate::image::load_gray(&loaded.entries[0].image).unwrap();
        assert_eq!(img, samples[0].image);
    }
}
