//! Gray-world normalizers and the reference profile they target.
//!
//! All three algorithms estimate a [`DiagonalTransform`] from channel means:
//!
//! * [`gray_world`]: `m_i = G_i / mu_i` over the whole image.
//! * [`database_gray_world`]: `m_i = ref_i / mu_i`, with the reference means
//!   taken from a [`ReferenceProfile`].
//! * [`fg_bg_gray_world`]: scale the whole image so the plasma averages to
//!   white, then rescale the cells alone toward the reference means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{
    apply_diagonal, channel_means, BinaryMask, ChannelMeans, DiagonalTransform, Image, Selection,
};

/// Plasma level the first FG-BG stage maps the background mean to.
pub const WHITE: f64 = 255.0;

/// Reference foreground means under the canonical illuminant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile")]
pub struct ReferenceProfile {
    mu_c: ChannelMeans,
    n_images: usize,
    created_from: Vec<String>,
}

#[derive(Deserialize)]
struct RawProfile {
    mu_c: ChannelMeans,
    n_images: usize,
    #[serde(default)]
    created_from: Vec<String>,
}

impl TryFrom<RawProfile> for ReferenceProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        ReferenceProfile::new(raw.mu_c, raw.n_images, raw.created_from)
    }
}

impl ReferenceProfile {
    pub fn new(mu_c: ChannelMeans, n_images: usize, created_from: Vec<String>) -> Result<Self> {
        if let Some(v) = mu_c.0.iter().find(|v| !(**v > 0.0 && **v <= 255.0)) {
            return Err(Error::InvalidProfile(format!(
                "reference mean {v} outside (0, 255]"
            )));
        }
        if n_images == 0 {
            return Err(Error::InvalidProfile("profile pools no images".into()));
        }
        Ok(Self {
            mu_c,
            n_images,
            created_from,
        })
    }

    pub fn mu_c(&self) -> ChannelMeans {
        self.mu_c
    }

    pub fn n_images(&self) -> usize {
        self.n_images
    }

    pub fn created_from(&self) -> &[String] {
        &self.created_from
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl Default for ReferenceProfile {
    /// Foreground means `(183, 189, 214)` pooled from twelve reference films.
    fn default() -> Self {
        Self {
            mu_c: ChannelMeans::new(183.0, 189.0, 214.0),
            n_images: 12,
            created_from: vec!["builtin-default".into()],
        }
    }
}

/// Assumed gray level per channel for simple gray world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrayTarget(ChannelMeans);

impl GrayTarget {
    pub fn new(g: ChannelMeans) -> Result<Self> {
        if let Some(v) = g.0.iter().find(|v| !(**v > 0.0 && **v <= 255.0)) {
            return Err(Error::InvalidConfig(format!("gray level {v} outside (0, 255]")));
        }
        Ok(Self(g))
    }

    pub fn uniform(level: f64) -> Result<Self> {
        Self::new(ChannelMeans::new(level, level, level))
    }

    pub fn levels(&self) -> ChannelMeans {
        self.0
    }
}

impl Default for GrayTarget {
    fn default() -> Self {
        Self(ChannelMeans::new(127.5, 127.5, 127.5))
    }
}

/// Output image together with the transforms that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationResult {
    pub output: Image,
    /// First (or only) transform. For FG-BG this is the background
    /// transform, applied to the whole image.
    pub transform: DiagonalTransform,
    /// FG-BG second stage, applied to foreground pixels only.
    pub foreground_transform: Option<DiagonalTransform>,
    pub mask_used: Option<BinaryMask>,
}

pub fn gray_world(img: &Image, target: &GrayTarget) -> Result<NormalizationResult> {
    let means = channel_means(img, Selection::All)?;
    let transform = DiagonalTransform::from_ratio(target.0 .0, means)?;
    Ok(NormalizationResult {
        output: apply_diagonal(img, &transform, Selection::All)?,
        transform,
        foreground_transform: None,
        mask_used: None,
    })
}

/// Database gray world over `region`; pixels outside it are untouched.
pub fn database_gray_world(
    img: &Image,
    profile: &ReferenceProfile,
    region: Selection<'_>,
) -> Result<NormalizationResult> {
    let means = channel_means(img, region)?;
    let transform = DiagonalTransform::from_ratio(profile.mu_c.0, means)?;
    Ok(NormalizationResult {
        output: apply_diagonal(img, &transform, region)?,
        transform,
        foreground_transform: None,
        mask_used: match region {
            Selection::All => None,
            Selection::Foreground(m) | Selection::Background(m) => Some(m.clone()),
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgBgConfig {
    pub background_target: f64,
}

impl Default for FgBgConfig {
    fn default() -> Self {
        Self {
            background_target: WHITE,
        }
    }
}

fn check_partition(img: &Image, mask: &BinaryMask) -> Result<()> {
    if img.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            found: mask.dims(),
        });
    }
    if mask.foreground_count() == 0 || mask.background_count() == 0 {
        return Err(Error::EmptySelection);
    }
    Ok(())
}

/// Background transform `m_i = target / mean(background_i)` and the whole
/// image scaled by it.
fn normalize_background(
    img: &Image,
    mask: &BinaryMask,
    target: f64,
) -> Result<(DiagonalTransform, Image)> {
    let bg = channel_means(img, Selection::Background(mask))?;
    let transform = DiagonalTransform::from_ratio([target; 3], bg)?;
    Ok((transform, apply_diagonal(img, &transform, Selection::All)?))
}

/// Two-stage plasma/cell normalization with the default white target.
pub fn fg_bg_gray_world(
    img: &Image,
    mask: &BinaryMask,
    profile: &ReferenceProfile,
) -> Result<NormalizationResult> {
    fg_bg_gray_world_with(img, mask, profile, &FgBgConfig::default())
}

/// Two-stage plasma/cell normalization:
///
/// 1. `M^b` maps the background channel means to `background_target`;
/// 2. `M^b` is applied to the whole image, giving `I1`;
/// 3. `M^f` maps the foreground means of `I1` to the profile;
/// 4. `M^f` is applied to the foreground of `I1` only.
pub fn fg_bg_gray_world_with(
    img: &Image,
    mask: &BinaryMask,
    profile: &ReferenceProfile,
    cfg: &FgBgConfig,
) -> Result<NormalizationResult> {
    if !(cfg.background_target > 0.0 && cfg.background_target.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "background target {} must be positive",
            cfg.background_target
        )));
    }
    check_partition(img, mask)?;
    let (background_transform, stage1) = normalize_background(img, mask, cfg.background_target)?;
    let fg = channel_means(&stage1, Selection::Foreground(mask))?;
    let foreground_transform = DiagonalTransform::from_ratio(profile.mu_c.0, fg)?;
    let output = apply_diagonal(&stage1, &foreground_transform, Selection::Foreground(mask))?;
    Ok(NormalizationResult {
        output,
        transform: background_transform,
        foreground_transform: Some(foreground_transform),
        mask_used: Some(mask.clone()),
    })
}

/// Pools background-normalized foreground pixels over a reference set.
#[derive(Clone, Debug, Default)]
pub struct ReferenceBuilder {
    sums: [f64; 3],
    count: usize,
    sources: Vec<String>,
}

impl ReferenceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, id: impl Into<String>, img: &Image, mask: &BinaryMask) -> Result<()> {
        let index = self.sources.len();
        let wrap = |e| Error::InImage {
            index,
            source: Box::new(e),
        };
        check_partition(img, mask).map_err(wrap)?;
        let (_, stage1) = normalize_background(img, mask, WHITE).map_err(wrap)?;
        for i in (0..stage1.len()).filter(|&i| mask.is_foreground(i)) {
            for c in 0..3 {
                self.sums[c] += stage1.plane(c)[i];
            }
        }
        self.count += mask.foreground_count();
        self.sources.push(id.into());
        Ok(())
    }

    pub fn finish(self) -> Result<ReferenceProfile> {
        if self.count == 0 {
            return Err(Error::EmptySelection);
        }
        let means = ChannelMeans(self.sums.map(|s| s / self.count as f64));
        ReferenceProfile::new(means, self.sources.len(), self.sources)
    }
}

/// Reference profile from `(image, mask)` pairs, identified by position.
pub fn build_reference_profile(pairs: &[(Image, BinaryMask)]) -> Result<ReferenceProfile> {
    let mut builder = ReferenceBuilder::new();
    for (i, (img, mask)) in pairs.iter().enumerate() {
        builder.add(format!("image-{i}"), img, mask)?;
    }
    builder.finish()
}
