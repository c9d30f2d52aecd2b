//! Synthetic blood-film-like scenes with exact ground truth.
//!
//! A scene is a bright plasma background holding non-overlapping dark disks.
//! Gaussian noise is added at render time and the result clamped to
//! `[0, 255]`; illumination casts are applied afterwards under the diagonal
//! model and are not clamped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{apply_diagonal, BinaryMask, DiagonalTransform, Image, Selection};

const PLACEMENT_ATTEMPTS: usize = 1000;
/// Minimum empty gap between two disks, so no two are 8-connected.
const DISK_GAP: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub n_cells: usize,
    /// Mean disk radius in pixels.
    pub cell_radius: f64,
    /// Radii are drawn uniformly from `cell_radius ± cell_radius_jitter`.
    pub cell_radius_jitter: f64,
    pub plasma_color: [f64; 3],
    pub cell_color: [f64; 3],
    pub noise_sigma: f64,
    /// Drives cell placement, and noise unless `noise_seed` is set.
    pub seed: u64,
    /// Separate noise stream; lets several captures share one geometry.
    pub noise_seed: Option<u64>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            n_cells: 25,
            cell_radius: 9.0,
            cell_radius_jitter: 2.0,
            plasma_color: [200.0, 204.0, 220.0],
            cell_color: [120.0, 90.0, 130.0],
            noise_sigma: 3.0,
            seed: 0,
            noise_seed: None,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.width == 0 || self.height == 0 {
            return bad(format!("empty scene {}x{}", self.width, self.height));
        }
        let colors = self.plasma_color.iter().chain(&self.cell_color);
        if colors.into_iter().any(|c| !(0.0..=255.0).contains(c)) {
            return bad("colors must lie in [0, 255]".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma {} must be >= 0", self.noise_sigma));
        }
        if self.n_cells > 0
            && !(self.cell_radius > 0.0
                && self.cell_radius_jitter >= 0.0
                && self.cell_radius_jitter < self.cell_radius)
        {
            return bad(format!(
                "radius {} ± {} must stay positive",
                self.cell_radius, self.cell_radius_jitter
            ));
        }
        Ok(())
    }

    /// Cell color after scaling the stain concentration by `k`.
    ///
    /// Under Beer-Lambert absorption the transmittance `cell / plasma` of
    /// each channel is raised to the power `k`.
    pub fn with_stain(&self, k: f64) -> SceneSpec {
        let cell_color =
            [0, 1, 2].map(|c| self.plasma_color[c] * (self.cell_color[c] / self.plasma_color[c]).powf(k));
        SceneSpec {
            cell_color,
            ..self.clone()
        }
    }
}

/// Disk centers and radii: `(cx, cy, r)` in pixel-corner coordinates.
pub fn place_cells(spec: &SceneSpec) -> Result<Vec<(f64, f64, f64)>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cells: Vec<(f64, f64, f64)> = Vec::with_capacity(spec.n_cells);
    let (w, h) = (spec.width as f64, spec.height as f64);
    for placed in 0..spec.n_cells {
        let mut ok = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let r = if spec.cell_radius_jitter > 0.0 {
                rng.random_range(
                    spec.cell_radius - spec.cell_radius_jitter
                        ..=spec.cell_radius + spec.cell_radius_jitter,
                )
            } else {
                spec.cell_radius
            };
            if 2.0 * r > w || 2.0 * r > h {
                continue;
            }
            let cx = rng.random_range(r..=w - r);
            let cy = rng.random_range(r..=h - r);
            let clear = cells.iter().all(|&(ox, oy, or)| {
                let d2 = (cx - ox).powi(2) + (cy - oy).powi(2);
                d2 >= (r + or + DISK_GAP).powi(2)
            });
            if clear {
                cells.push((cx, cy, r));
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::SpecInfeasible(format!(
                "placed {placed} of {} cells",
                spec.n_cells
            )));
        }
    }
    Ok(cells)
}

/// Renders the given disks with the colors and noise of `spec`.
pub fn render_disks(spec: &SceneSpec, cells: &[(f64, f64, f64)]) -> Result<(Image, BinaryMask)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut fg = vec![false; w * h];
    for &(cx, cy, r) in cells {
        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as usize).min(w);
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil() as usize).min(h);
        for y in y0..y1 {
            for x in x0..x1 {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                if dx * dx + dy * dy <= r * r {
                    fg[y * w + x] = true;
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed.unwrap_or(spec.seed));
    rng.set_stream(1);
    let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
    let img = Image::from_fn(w, h, |x, y| {
        let base = if fg[y * w + x] {
            spec.cell_color
        } else {
            spec.plasma_color
        };
        base.map(|v| {
            if spec.noise_sigma > 0.0 {
                (v + noise.sample(&mut rng)).clamp(0.0, 255.0)
            } else {
                v
            }
        })
    })?;
    Ok((img, BinaryMask::new(w, h, fg)?))
}

/// Clean image and exact ground-truth mask; deterministic in the seeds.
pub fn render_scene(spec: &SceneSpec) -> Result<(Image, BinaryMask)> {
    let cells = place_cells(spec)?;
    render_disks(spec, &cells)
}

/// Diagonal action of a simulated unknown illuminant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IlluminantCast(pub DiagonalTransform);

impl IlluminantCast {
    pub fn new(d_r: f64, d_g: f64, d_b: f64) -> Result<Self> {
        DiagonalTransform::new(d_r, d_g, d_b).map(Self)
    }

    /// Factors drawn independently and uniformly from `lo..=hi`.
    pub fn random(rng: &mut impl Rng, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidConfig(format!("cast range {lo}..{hi}")));
        }
        let mut draw = || rng.random_range(lo..=hi);
        Self::new(draw(), draw(), draw())
    }

    pub fn factors(&self) -> [f64; 3] {
        self.0.factors()
    }
}

pub fn apply_cast(img: &Image, cast: &IlluminantCast) -> Image {
    apply_diagonal(img, &cast.0, Selection::All).expect("whole-image selection")
}

/// One capture of a shared field.
#[derive(Clone, Debug)]
pub struct CastVariant {
    pub image: Image,
    pub mask: BinaryMask,
    pub cast: IlluminantCast,
    pub stain: f64,
}

/// Settings for a family of captures of one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CastBenchmark {
    pub n_variants: usize,
    pub cast_range: (f64, f64),
    /// Stain concentration multipliers, log-uniform in this range.
    pub stain_range: (f64, f64),
    /// Each capture draws its own noise when set.
    pub independent_noise: bool,
    pub seed: u64,
}

impl Default for CastBenchmark {
    fn default() -> Self {
        Self {
            n_variants: 15,
            cast_range: (0.6, 1.4),
            stain_range: (1.0, 1.0),
            independent_noise: false,
            seed: 0,
        }
    }
}

/// Renders `bench.n_variants` captures of the field described by `spec`:
/// same cell layout, each under its own illuminant and stain level.
pub fn cast_variants(spec: &SceneSpec, bench: &CastBenchmark) -> Result<Vec<CastVariant>> {
    let cells = place_cells(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(bench.seed);
    let (slo, shi) = bench.stain_range;
    if !(slo > 0.0 && slo <= shi) {
        return Err(Error::InvalidConfig(format!("stain range {slo}..{shi}")));
    }
    let mut shared: Option<(Image, BinaryMask)> = None;
    let mut out = Vec::with_capacity(bench.n_variants);
    for i in 0..bench.n_variants {
        let cast = IlluminantCast::random(&mut rng, bench.cast_range.0, bench.cast_range.1)?;
        let stain = if slo == shi {
            slo
        } else {
            rng.random_range(slo.ln()..=shi.ln()).exp()
        };
        let (image, mask) = if stain == 1.0 && !bench.independent_noise {
            shared.get_or_insert_with(|| render_disks(spec, &cells).expect("validated")).clone()
        } else {
            let mut variant = spec.with_stain(stain);
            if bench.independent_noise {
                variant.noise_seed = Some(spec.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)));
            }
            render_disks(&variant, &cells)?
        };
        out.push(CastVariant {
            image: apply_cast(&image, &cast),
            mask,
            cast,
            stain,
        });
    }
    Ok(out)
}
