use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{ColorType, DynamicImage, ImageFormat};

use super::{luma, GrayImage, RgbImage};
use crate::error::{Error, Result};
use crate::segment::BwMask;

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Reads a PNG or binary PGM (P5, maxval 255) file as grayscale.
///
/// Color PNGs are reduced to BT.601 luma.
pub fn load_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray(&bytes)
}

/// Reads a ground-truth mask. Intensities ≥ 128 are positive.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BwMask> {
    let img = load_gray(path)?;
    Ok(BwMask::from_gray(&img, 128))
}

pub(crate) fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else {
        Err(Error::Format("expected PNG or binary PGM (P5)".into()))
    }
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let dynamic = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let data = match dynamic.color() {
        ColorType::L8 | ColorType::La8 | ColorType::L16 | ColorType::La16 => {
            dynamic.to_luma8().into_raw()
        }
        _ => dynamic
            .to_rgb8()
            .pixels()
            .map(|p| luma(p[0], p[1], p[2]))
            .collect(),
    };
    GrayImage::new(w, h, data)
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format("malformed PGM header".into()))?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Format(format!("PGM maxval {maxval} unsupported, expected 255")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Format("malformed PGM header".into()));
    }
    pos += 1;
    let data = bytes
        .get(pos..pos + w * h)
        .ok_or_else(|| Error::Format("truncated PGM data".into()))?;
    GrayImage::new(w, h, data.to_vec())
}

pub(crate) fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn save_png_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .ok_or_else(|| Error::Dimension("buffer size".into()))?;
    write_png(DynamicImage::ImageLuma8(buf), path.as_ref())
}

pub fn save_png_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let raw: Vec<u8> = img.data.iter().flatten().copied().collect();
    let buf = image::RgbImage::from_raw(img.width as u32, img.height as u32, raw)
        .ok_or_else(|| Error::Dimension("buffer size".into()))?;
    write_png(DynamicImage::ImageRgb8(buf), path.as_ref())
}

/// Saves by extension: `.pgm` or `.png`.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") => save_pgm(img, path),
        Some("png") => save_png_gray(img, path),
        _ => Err(Error::Format(format!("cannot infer format of {}", path.display()))),
    }
}

fn write_png(img: DynamicImage, path: &Path) -> Result<()> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, buf.into_inner()).map_err(|e| Error::io(path, e))
}
