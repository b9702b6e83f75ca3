//! Segmenters producing intensity-ordered label maps, and BW mask conversion.

mod kmeans;
mod ngn;
mod otsu;
mod watershed;

pub use kmeans::{kmeans_1d, segment_kmeans, KMeansFit};
pub use ngn::segment_ngn;
pub use otsu::{otsu_thresholds, segment_otsu};
pub use watershed::{segment_watershed, watershed_immersion, watershed_relief, WATERSHED_LINE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Per-pixel segment index in `1..=k`. Segment 1 is the darkest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    k: u32,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, k: u32, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} labels for a {width}x{height} map",
                labels.len()
            )));
        }
        if k == 0 || labels.iter().any(|&l| l == 0 || l > k) {
            return Err(Error::Palette(format!("labels must lie in 1..={k}")));
        }
        Ok(Self {
            width,
            height,
            k,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of segments.
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Mean intensity of each segment, `None` for unused labels.
    pub fn segment_means(&self, img: &GrayImage) -> Vec<Option<f64>> {
        let mut sums = vec![(0u64, 0u64); self.k as usize];
        for (&l, &v) in self.labels.iter().zip(img.data()) {
            let s = &mut sums[l as usize - 1];
            s.0 += v as u64;
            s.1 += 1;
        }
        sums.iter()
            .map(|&(s, n)| (n > 0).then(|| s as f64 / n as f64))
            .collect()
    }
}

/// Binary mask, `true` = positive (white).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BwMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BwMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// Pixels at or above `threshold` become positive.
    pub fn from_gray(img: &GrayImage, threshold: u8) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            bits: img.data().iter().map(|&v| v >= threshold).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_positive(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_gray(&self) -> GrayImage {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        GrayImage::new(self.width, self.height, data).expect("mask dimensions are valid")
    }

    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }
}

/// How a label map becomes a BW mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BwMode {
    /// Only segment `k` is positive.
    Brightest,
    /// Segments `>= L` are positive.
    ThresholdLabel(u32),
}

impl std::fmt::Display for BwMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BwMode::Brightest => write!(f, "brightest"),
            BwMode::ThresholdLabel(l) => write!(f, "threshold-label:{l}"),
        }
    }
}

impl std::str::FromStr for BwMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "brightest" {
            return Ok(BwMode::Brightest);
        }
        s.strip_prefix("threshold-label:")
            .and_then(|l| l.parse().ok())
            .map(BwMode::ThresholdLabel)
            .ok_or_else(|| Error::Config(format!("unknown bw mode `{s}`")))
    }
}

pub fn to_bw(map: &LabelMap, mode: BwMode) -> Result<BwMask> {
    let cut = match mode {
        BwMode::Brightest => map.k,
        BwMode::ThresholdLabel(l) if (1..=map.k).contains(&l) => l,
        BwMode::ThresholdLabel(l) => {
            return Err(Error::Palette(format!("threshold label {l} outside 1..={}", map.k)))
        }
    };
    BwMask::new(
        map.width,
        map.height,
        map.labels.iter().map(|&l| l >= cut).collect(),
    )
}

/// Relabels raw cluster ids so that label order follows `keys` ascending
/// (ties by id). `raw` holds zero-based ids into `keys`.
pub(crate) fn relabel_by_key(
    width: usize,
    height: usize,
    raw: &[usize],
    keys: &[f64],
) -> Result<LabelMap> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    let mut label_of = vec![0u32; keys.len()];
    for (rank, &id) in order.iter().enumerate() {
        label_of[id] = rank as u32 + 1;
    }
    LabelMap::new(
        width,
        height,
        keys.len() as u32,
        raw.iter().map(|&id| label_of[id]).collect(),
    )
}
