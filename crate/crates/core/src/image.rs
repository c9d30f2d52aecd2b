//! Image and mask data model.
//!
//! An [`Image`] is three planar `f64` channels on the nominal `[0, 255]`
//! scale. Values above 255 are legal between pipeline stages; they are only
//! clamped by [`encode_quantize`]. A [`BinaryMask`] partitions the pixels of
//! an image into foreground (cells) and background (plasma).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RED: usize = 0;
pub const GREEN: usize = 1;
pub const BLUE: usize = 2;

/// Planar RGB image with non-negative finite intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
}

impl Image {
    /// Builds an image from three planes in row-major order.
    pub fn new(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let n = width * height;
        for (c, plane) in planes.iter().enumerate() {
            if plane.len() != n {
                return Err(Error::InvalidImage(format!(
                    "plane {c} has {} values, expected {n}",
                    plane.len()
                )));
            }
            if let Some(v) = plane.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidImage(format!(
                    "plane {c} contains invalid intensity {v}"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let n = width * height;
        let mut planes = [
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        ];
        for y in 0..height {
            for x in 0..width {
                let p = f(x, y);
                for c in 0..3 {
                    planes[c].push(p[c]);
                }
            }
        }
        Self::new(width, height, planes)
    }

    /// Constant image.
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::from_fn(width, height, |_, _| rgb)
    }

    /// Builds an image from a list of pixels in row-major order.
    pub fn from_pixels(width: usize, height: usize, pixels: &[[f64; 3]]) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels given for a {width}x{height} image",
                pixels.len()
            )));
        }
        Self::from_fn(width, height, |x, y| pixels[y * width + x])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        &self.planes[channel]
    }

    pub fn planes(&self) -> &[Vec<f64>; 3] {
        &self.planes
    }

    pub fn into_planes(self) -> [Vec<f64>; 3] {
        self.planes
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixel_at(y * self.width + x)
    }

    /// Pixel by linear row-major index.
    pub fn pixel_at(&self, i: usize) -> [f64; 3] {
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |i| self.pixel_at(i))
    }

    /// Applies `f` to every value of every plane, keeping the layout.
    pub fn map_values(&self, mut f: impl FnMut(usize, f64) -> f64) -> Result<Self> {
        let planes = [0, 1, 2].map(|c| self.planes[c].iter().map(|&v| f(c, v)).collect());
        Self::new(self.width, self.height, planes)
    }

    /// Returns the image with its channels reordered: output channel `c` is
    /// input channel `order[c]`.
    pub fn permute_channels(&self, order: [usize; 3]) -> Self {
        Self {
            width: self.width,
            height: self.height,
            planes: order.map(|c| self.planes[c].clone()),
        }
    }

    pub(crate) fn from_planes_unchecked(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Self {
        debug_assert!(planes.iter().all(|p| p.len() == width * height));
        Self {
            width,
            height,
            planes,
        }
    }

    pub(crate) fn check_same_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: dims,
            });
        }
        Ok(())
    }
}

/// Per-pixel class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Foreground,
    Background,
}

/// Foreground/background partition of an image's pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    foreground: Vec<bool>,
}

impl BinaryMask {
    /// Builds a mask from row-major foreground flags.
    pub fn new(width: usize, height: usize, foreground: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || foreground.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "mask of {} labels does not fit {width}x{height}",
                foreground.len()
            )));
        }
        Ok(Self {
            width,
            height,
            foreground,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Label,
    ) -> Result<Self> {
        let mut fg = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                fg.push(f(x, y) == Label::Foreground);
            }
        }
        Self::new(width, height, fg)
    }

    /// Mask with every pixel set to `label`.
    pub fn uniform(width: usize, height: usize, label: Label) -> Result<Self> {
        Self::new(width, height, vec![label == Label::Foreground; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.foreground.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label_at(&self, i: usize) -> Label {
        if self.foreground[i] {
            Label::Foreground
        } else {
            Label::Background
        }
    }

    pub fn label(&self, x: usize, y: usize) -> Label {
        self.label_at(y * self.width + x)
    }

    pub fn is_foreground(&self, i: usize) -> bool {
        self.foreground[i]
    }

    /// Row-major foreground flags.
    pub fn foreground_flags(&self) -> &[bool] {
        &self.foreground
    }

    pub fn foreground_count(&self) -> usize {
        self.foreground.iter().filter(|&&f| f).count()
    }

    pub fn background_count(&self) -> usize {
        self.len() - self.foreground_count()
    }

    /// Intersection-over-union of the foreground sets.
    pub fn foreground_iou(&self, other: &BinaryMask) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.foreground.iter().zip(&other.foreground) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        Ok(if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        })
    }

    /// Fraction of pixels carrying the same label in both masks.
    pub fn agreement(&self, other: &BinaryMask) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        let same = self
            .foreground
            .iter()
            .zip(&other.foreground)
            .filter(|(a, b)| a == b)
            .count();
        Ok(same as f64 / self.len() as f64)
    }
}

/// Pixel subset an operation is restricted to.
#[derive(Clone, Copy, Debug)]
pub enum Selection<'a> {
    All,
    Foreground(&'a BinaryMask),
    Background(&'a BinaryMask),
}

impl Selection<'_> {
    fn mask(&self) -> Option<&BinaryMask> {
        match self {
            Selection::All => None,
            Selection::Foreground(m) | Selection::Background(m) => Some(m),
        }
    }

    fn contains(&self, i: usize) -> bool {
        match self {
            Selection::All => true,
            Selection::Foreground(m) => m.is_foreground(i),
            Selection::Background(m) => !m.is_foreground(i),
        }
    }
}

/// Per-channel arithmetic means.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeans(pub [f64; 3]);

impl ChannelMeans {
    pub fn new(r: f64, g: f64, b: f64) -> Self {
        Self([r, g, b])
    }

    pub fn r(&self) -> f64 {
        self.0[RED]
    }

    pub fn g(&self) -> f64 {
        self.0[GREEN]
    }

    pub fn b(&self) -> f64 {
        self.0[BLUE]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }
}

/// Diagonal illumination transform: one positive scale factor per channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct DiagonalTransform([f64; 3]);

impl DiagonalTransform {
    pub const IDENTITY: DiagonalTransform = DiagonalTransform([1.0; 3]);

    pub fn new(m_r: f64, m_g: f64, m_b: f64) -> Result<Self> {
        Self::from_factors([m_r, m_g, m_b])
    }

    pub fn from_factors(factors: [f64; 3]) -> Result<Self> {
        if factors.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(Error::InvalidTransform(format!(
                "factors must be finite and positive, got {factors:?}"
            )));
        }
        Ok(Self(factors))
    }

    /// Factors `target_i / source_i`, the ratio form shared by every gray-world
    /// variant.
    pub fn from_ratio(target: [f64; 3], source: ChannelMeans) -> Result<Self> {
        if let Some(channel) = source.0.iter().position(|&m| m == 0.0) {
            return Err(Error::ZeroMean { channel });
        }
        Self::from_factors([0, 1, 2].map(|c| target[c] / source.0[c]))
    }

    pub fn factors(&self) -> [f64; 3] {
        self.0
    }

    /// Componentwise product: applying the result equals applying `self`
    /// then `other`.
    pub fn compose(&self, other: &DiagonalTransform) -> DiagonalTransform {
        DiagonalTransform([0, 1, 2].map(|c| self.0[c] * other.0[c]))
    }

    pub fn inverse(&self) -> DiagonalTransform {
        DiagonalTransform(self.0.map(|m| 1.0 / m))
    }

    /// Largest `|m_i - 1|`.
    pub fn max_deviation_from_identity(&self) -> f64 {
        self.0.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max)
    }
}

impl TryFrom<[f64; 3]> for DiagonalTransform {
    type Error = Error;

    fn try_from(value: [f64; 3]) -> Result<Self> {
        Self::from_factors(value)
    }
}

impl From<DiagonalTransform> for [f64; 3] {
    fn from(t: DiagonalTransform) -> Self {
        t.0
    }
}

fn check_selection(img: &Image, sel: &Selection<'_>) -> Result<()> {
    match sel.mask() {
        Some(m) => img.check_same_dims(m.dims()),
        None => Ok(()),
    }
}

/// Arithmetic mean of each channel over the selected pixels.
pub fn channel_means(img: &Image, sel: Selection<'_>) -> Result<ChannelMeans> {
    check_selection(img, &sel)?;
    let mut sums = [0.0f64; 3];
    let mut count = 0usize;
    for i in (0..img.len()).filter(|&i| sel.contains(i)) {
        for (c, sum) in sums.iter_mut().enumerate() {
            *sum += img.planes[c][i];
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptySelection);
    }
    Ok(ChannelMeans(sums.map(|s| s / count as f64)))
}

/// Multiplies every selected pixel by the transform; other pixels are copied.
/// No clamping is performed.
pub fn apply_diagonal(img: &Image, t: &DiagonalTransform, sel: Selection<'_>) -> Result<Image> {
    check_selection(img, &sel)?;
    let planes = [0, 1, 2].map(|c| {
        let m = t.0[c];
        img.planes[c]
            .iter()
            .enumerate()
            .map(|(i, &v)| if sel.contains(i) { m * v } else { v })
            .collect()
    });
    Ok(Image::from_planes_unchecked(img.width, img.height, planes))
}

/// Clamps to `[0, 255]` and rounds half-up.
pub fn quantize_value(v: f64) -> u8 {
    (v.clamp(0.0, 255.0) + 0.5).floor() as u8
}

/// Converts to an 8-bit raster.
pub fn encode_quantize(img: &Image) -> image::RgbImage {
    let mut raw = Vec::with_capacity(3 * img.len());
    for i in 0..img.len() {
        for c in 0..3 {
            raw.push(quantize_value(img.planes[c][i]));
        }
    }
    image::RgbImage::from_raw(img.width as u32, img.height as u32, raw)
        .expect("buffer length matches dimensions")
}

/// Lifts an 8-bit raster back to the float domain.
pub fn from_rgb8(raster: &image::RgbImage) -> Image {
    let (w, h) = (raster.width() as usize, raster.height() as usize);
    let mut planes = [
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    for px in raster.pixels() {
        for c in 0..3 {
            planes[c].push(px.0[c] as f64);
        }
    }
    Image::from_planes_unchecked(w, h, planes)
}

/// Quantizes to 8 bits and back; the float image a decoder would see.
pub fn quantized(img: &Image) -> Image {
    from_rgb8(&encode_quantize(img))
}
