//! PNG and binary PPM codecs for images and masks.
//!
//! Images are 8-bit RGB only: grayscale, alpha and 16-bit inputs are rejected.
//! Masks are 8-bit grayscale PNGs with foreground = 0 and background = 255.

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};
use crate::image::{encode_quantize, from_rgb8, BinaryMask, Image};

/// Raster container formats used on disk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RasterFormat {
    Png,
    Ppm,
}

impl RasterFormat {
    /// Chooses a format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("png") => Ok(Self::Png),
            Some("ppm") => Ok(Self::Ppm),
            other => Err(Error::UnsupportedFormat(format!(
                "extension {other:?} (expected .png or .ppm)"
            ))),
        }
    }
}

/// Decodes an 8-bit RGB PNG or P6 PPM.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    match image::load_from_memory(bytes)? {
        DynamicImage::ImageRgb8(raster) => Ok(from_rgb8(&raster)),
        other => Err(Error::UnsupportedFormat(format!(
            "expected 8-bit RGB, got {:?}",
            other.color()
        ))),
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_image(&std::fs::read(path)?)
}

/// Quantizes and encodes an image.
pub fn encode_image(img: &Image, format: RasterFormat) -> Result<Vec<u8>> {
    let raster = encode_quantize(img);
    let mut out = Vec::new();
    match format {
        RasterFormat::Png => PngEncoder::new(&mut out).write_image(
            raster.as_raw(),
            raster.width(),
            raster.height(),
            ExtendedColorType::Rgb8,
        )?,
        RasterFormat::Ppm => PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
            .write_image(
                raster.as_raw(),
                raster.width(),
                raster.height(),
                ExtendedColorType::Rgb8,
            )?,
    }
    Ok(out)
}

pub fn write_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, RasterFormat::from_path(path)?)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_mask(mask: &BinaryMask) -> Result<Vec<u8>> {
    let raw: Vec<u8> = mask
        .foreground_flags()
        .iter()
        .map(|&fg| if fg { 0 } else { 255 })
        .collect();
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(
        &raw,
        mask.width() as u32,
        mask.height() as u32,
        ExtendedColorType::L8,
    )?;
    Ok(out)
}

/// Decodes a grayscale mask PNG. Values below 128 are foreground.
pub fn decode_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let decoded = image::load(Cursor::new(bytes), ImageFormat::Png)?;
    match decoded {
        DynamicImage::ImageLuma8(gray) => BinaryMask::new(
            gray.width() as usize,
            gray.height() as usize,
            gray.as_raw().iter().map(|&v| v < 128).collect(),
        ),
        other => Err(Error::UnsupportedFormat(format!(
            "mask must be 8-bit grayscale, got {:?}",
            other.color()
        ))),
    }
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask(&std::fs::read(path)?)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    std::fs::write(path, encode_mask(mask)?)?;
    Ok(())
}
