use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{DescriptorKind, FeatureVector};
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborConfig {
    pub scales: usize,
    pub orientations: usize,
    /// Wavelength of the finest scale in pixels; each scale doubles it.
    pub base_wavelength: f64,
    /// Gaussian sigma as a fraction of the wavelength.
    pub sigma_ratio: f64,
    /// Envelope aspect ratio across the carrier.
    pub aspect: f64,
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            orientations: 6,
            base_wavelength: 4.0,
            sigma_ratio: 0.56,
            aspect: 0.5,
        }
    }
}

struct Kernel {
    radius: usize,
    /// `(2r+1)²` taps, row-major.
    taps: Vec<f64>,
}

impl Kernel {
    fn new(wavelength: f64, theta: f64, cfg: &GaborConfig) -> Self {
        let sigma = cfg.sigma_ratio * wavelength;
        let radius = (3.0 * sigma).ceil() as usize;
        let side = 2 * radius + 1;
        let (sin, cos) = theta.sin_cos();
        let r = radius as f64;
        let mut taps = Vec::with_capacity(side * side);
        for dy in 0..side {
            for dx in 0..side {
                let (x, y) = (dx as f64 - r, dy as f64 - r);
                let xr = x * cos + y * sin;
                let yr = -x * sin + y * cos;
                let envelope = (-(xr * xr + cfg.aspect * cfg.aspect * yr * yr) / (2.0 * sigma * sigma)).exp();
                taps.push(envelope * (2.0 * PI * xr / wavelength).cos());
            }
        }
        // zero DC, unit L1
        let mean = taps.iter().sum::<f64>() / taps.len() as f64;
        taps.iter_mut().for_each(|t| *t -= mean);
        let l1: f64 = taps.iter().map(|t| t.abs()).sum();
        taps.iter_mut().for_each(|t| *t /= l1);
        Self { radius, taps }
    }
}

type Spectra = ((usize, usize), Vec<Vec<Complex64>>);

/// Precomputed filter bank, ordered scale-major then orientation.
pub struct GaborBank {
    cfg: GaborConfig,
    kernels: Vec<Kernel>,
    spectra: Mutex<Option<Spectra>>,
}

impl GaborBank {
    pub fn new(cfg: GaborConfig) -> Result<Self> {
        if cfg.scales == 0 || cfg.orientations == 0 {
            return Err(Error::Config("gabor bank needs at least one scale and orientation".into()));
        }
        let mut kernels = Vec::with_capacity(cfg.scales * cfg.orientations);
        for s in 0..cfg.scales {
            let wavelength = cfg.base_wavelength * 2f64.powi(s as i32);
            for o in 0..cfg.orientations {
                let theta = o as f64 * PI / cfg.orientations as f64;
                kernels.push(Kernel::new(wavelength, theta, &cfg));
            }
        }
        Ok(Self {
            cfg,
            kernels,
            spectra: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &GaborConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    fn max_radius(&self) -> usize {
        self.kernels.iter().map(|k| k.radius).max().unwrap_or(0)
    }

    /// Magnitude responses, one `width × height` plane per filter.
    pub fn responses(&self, img: &GrayImage) -> Vec<Vec<f64>> {
        let (w, h) = (img.width(), img.height());
        let pad = self.max_radius();
        let (pw, ph) = (fast_len(w + 2 * pad), fast_len(h + 2 * pad));
        let mut planner = FftPlanner::new();
        let fft = Fft2d::new(&mut planner, pw, ph);

        let mut padded = vec![Complex64::default(); pw * ph];
        for py in 0..ph {
            let sy = reflect(py as isize - pad as isize, h);
            for px in 0..pw {
                let sx = reflect(px as isize - pad as isize, w);
                padded[py * pw + px] = Complex64::new(img.get(sx, sy) as f64, 0.0);
            }
        }
        fft.forward(&mut padded);

        let mut cache = self.spectra.lock().expect("spectra cache poisoned");
        if cache.as_ref().map(|(size, _)| *size) != Some((pw, ph)) {
            let spectra = self
                .kernels
                .iter()
                .map(|k| {
                    let mut buf = vec![Complex64::default(); pw * ph];
                    let side = 2 * k.radius + 1;
                    for dy in 0..side {
                        let yy = (dy as isize - k.radius as isize).rem_euclid(ph as isize) as usize;
                        for dx in 0..side {
                            let xx = (dx as isize - k.radius as isize).rem_euclid(pw as isize) as usize;
                            buf[yy * pw + xx].re += k.taps[dy * side + dx];
                        }
                    }
                    fft.forward(&mut buf);
                    buf
                })
                .collect();
            *cache = Some(((pw, ph), spectra));
        }
        let (_, spectra) = cache.as_ref().expect("spectra computed above");

        let scale = 1.0 / (pw * ph) as f64;
        spectra
            .iter()
            .map(|spec| {
                let mut buf: Vec<Complex64> = padded.iter().zip(spec).map(|(a, b)| a * b).collect();
                fft.inverse(&mut buf);
                let mut plane = Vec::with_capacity(w * h);
                for y in 0..h {
                    let row = &buf[(y + pad) * pw + pad..][..w];
                    plane.extend(row.iter().map(|c| c.re.abs() * scale));
                }
                plane
            })
            .collect()
    }

    /// `(mean, std)` of each filter's magnitude response.
    pub fn extract(&self, img: &GrayImage) -> FeatureVector {
        let mut values = Vec::with_capacity(2 * self.len());
        for plane in self.responses(img) {
            let n = plane.len() as f64;
            let mean = plane.iter().sum::<f64>() / n;
            let var = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            values.push(mean);
            values.push(var.sqrt());
        }
        FeatureVector {
            values,
            kind: DescriptorKind::Gabor,
            source: String::new(),
        }
    }
}

/// Gabor texture descriptor with the default wavelengths (4, 8, 16, 32 px
/// for four scales) and `orientations` evenly spaced over 180°.
pub fn extract_gabor(img: &GrayImage, scales: usize, orientations: usize) -> Result<FeatureVector> {
    let bank = GaborBank::new(GaborConfig {
        scales,
        orientations,
        ..GaborConfig::default()
    })?;
    Ok(bank.extract(img))
}

/// Symmetric reflection (edge sample repeated) into `0..n`.
fn reflect(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    i = i.rem_euclid(period);
    if i >= n {
        i = period - 1 - i;
    }
    i as usize
}

/// Smallest length ≥ `n` whose only prime factors are 2, 3 and 5.
fn fast_len(n: usize) -> usize {
    (n..)
        .find(|&m| {
            let mut m = m;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            m == 1
        })
        .expect("smooth numbers are unbounded")
}

struct Fft2d {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    fn new(planner: &mut FftPlanner<f64>, width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// Unnormalized inverse.
    fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
    }

    fn run(&self, data: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        rows.process(data);
        let mut t = vec![Complex64::default(); data.len()];
        transpose(data, &mut t, self.width, self.height);
        cols.process(&mut t);
        transpose(&t, data, self.height, self.width);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], width: usize, height: usize) {
    for y in 0..height {
        for x in 0..width {
            dst[x * height + y] = src[y * width + x];
        }
    }
}
