use serde::{Deserialize, Serialize};

use super::RgbImage;
use crate::error::{Error, Result};
use crate::segment::LabelMap;

/// One distinct color per segment index; label `k` maps to `colors[k - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedPalette {
    colors: Vec<[u8; 3]>,
}

const DEFAULT_COLORS: [[u8; 3]; 8] = [
    [0, 0, 0],
    [255, 255, 255],
    [255, 0, 0],
    [0, 255, 0],
    [0, 0, 255],
    [255, 255, 0],
    [255, 0, 255],
    [0, 255, 255],
];

impl IndexedPalette {
    pub fn new(colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.is_empty() {
            return Err(Error::Palette("palette needs at least one color".into()));
        }
        for (i, a) in colors.iter().enumerate() {
            if colors[..i].contains(a) {
                return Err(Error::Palette(format!("duplicate color {a:?}")));
            }
        }
        Ok(Self { colors })
    }

    /// Fixed table for up to 8 segments: black, white, red, green, blue,
    /// yellow, magenta, cyan. Larger `k` extends with a deterministic hue walk.
    pub fn default_for(k: usize) -> Self {
        let k = k.max(1);
        let mut colors: Vec<[u8; 3]> = DEFAULT_COLORS.iter().take(k).copied().collect();
        let mut i = 0u32;
        while colors.len() < k {
            // golden-ratio stride over a 24-bit color cube
            let c = i.wrapping_mul(0x9E37_79B9) >> 8;
            let color = [(c >> 16) as u8, (c >> 8) as u8, c as u8];
            if !colors.contains(&color) {
                colors.push(color);
            }
            i += 1;
        }
        Self { colors }
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        &self.colors
    }
}

/// Colors each pixel with the palette entry of its label.
pub fn labelmap_to_color(map: &LabelMap, palette: &IndexedPalette) -> Result<RgbImage> {
    let data = map
        .labels()
        .iter()
        .map(|&l| {
            palette
                .colors
                .get((l as usize).wrapping_sub(1))
                .copied()
                .ok_or_else(|| {
                    Error::Palette(format!("label {l} exceeds palette of {} colors", palette.len()))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RgbImage {
        width: map.width(),
        height: map.height(),
        data,
    })
}
