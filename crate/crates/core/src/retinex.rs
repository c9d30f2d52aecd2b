//! Multi-resolution McCann-style Retinex, used as a baseline.
//!
//! Each channel is processed independently in the `log2(v + 1)` domain. A
//! pyramid is built by 2x2 averaging; the lightness estimate starts at the
//! channel maximum on the coarsest level and is refined level by level with
//! ratio-product-reset-average passes against the four axial neighbors,
//! then replicated onto the next finer level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetinexConfig {
    pub n_iterations: usize,
    /// Stretch each channel to `[0, 255]` first.
    pub pre_normalize: bool,
}

impl Default for RetinexConfig {
    fn default() -> Self {
        Self {
            n_iterations: 4,
            pre_normalize: true,
        }
    }
}

/// Affine per-channel stretch of `[min, max]` onto `[0, 255]`.
pub fn pre_normalize(img: &Image) -> Result<Image> {
    let mut ranges = [(0.0, 0.0); 3];
    for (c, range) in ranges.iter_mut().enumerate() {
        let plane = img.plane(c);
        let lo = plane.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return Err(Error::DegenerateChannel { channel: c });
        }
        *range = (lo, hi);
    }
    img.map_values(|c, v| {
        let (lo, hi) = ranges[c];
        (v - lo) / (hi - lo) * 255.0
    })
}

struct Level {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

fn downsample(level: &Level) -> Level {
    let (w, h) = (level.width.div_ceil(2), level.height.div_ceil(2));
    let mut values = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut sum, mut n) = (0.0, 0usize);
            for sy in 2 * y..(2 * y + 2).min(level.height) {
                for sx in 2 * x..(2 * x + 2).min(level.width) {
                    sum += level.values[sy * level.width + sx];
                    n += 1;
                }
            }
            values[y * w + x] = sum / n as f64;
        }
    }
    Level {
        width: w,
        height: h,
        values,
    }
}

fn pyramid(width: usize, height: usize, log: Vec<f64>) -> Vec<Level> {
    let mut levels = vec![Level {
        width,
        height,
        values: log,
    }];
    loop {
        let last = levels.last().expect("non-empty");
        if last.width.div_ceil(2) < 2 || last.height.div_ceil(2) < 2 {
            return levels;
        }
        let next = downsample(last);
        levels.push(next);
    }
}

const DIRECTIONS: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// One ratio-product-reset-average sweep in each axial direction.
fn iterate(level: &Level, estimate: &mut [f64], maximum: f64) {
    let (w, h) = (level.width, level.height);
    let rr = &level.values;
    for (dx, dy) in DIRECTIONS {
        let previous = estimate.to_vec();
        for y in 0..h {
            let ny = y as isize + dy;
            if ny < 0 || ny >= h as isize {
                continue;
            }
            for x in 0..w {
                let nx = x as isize + dx;
                if nx < 0 || nx >= w as isize {
                    continue;
                }
                let (p, q) = (y * w + x, ny as usize * w + nx as usize);
                let product = (previous[q] + rr[p] - rr[q]).min(maximum);
                estimate[p] = 0.5 * (previous[p] + product);
            }
        }
    }
}

fn upsample(coarse: &[f64], cw: usize, fine: &Level) -> Vec<f64> {
    let mut out = Vec::with_capacity(fine.width * fine.height);
    for y in 0..fine.height {
        for x in 0..fine.width {
            out.push(coarse[(y / 2) * cw + x / 2]);
        }
    }
    out
}

fn retinex_channel(values: &[f64], width: usize, height: usize, n_iterations: usize) -> Vec<f64> {
    let log: Vec<f64> = values.iter().map(|v| (v + 1.0).log2()).collect();
    let maximum = log.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let levels = pyramid(width, height, log);

    let coarsest = levels.last().expect("non-empty");
    let mut estimate = vec![maximum; coarsest.width * coarsest.height];
    let mut estimate_width = coarsest.width;
    for (k, level) in levels.iter().enumerate().rev() {
        if k + 1 < levels.len() {
            estimate = upsample(&estimate, estimate_width, level);
            estimate_width = level.width;
        }
        for _ in 0..n_iterations {
            iterate(level, &mut estimate, maximum);
        }
    }
    estimate
        .into_iter()
        .map(|l| (l.exp2() - 1.0).max(0.0))
        .collect()
}

pub fn retinex(img: &Image, cfg: &RetinexConfig) -> Result<Image> {
    let prepared = if cfg.pre_normalize {
        pre_normalize(img)?
    } else {
        img.clone()
    };
    if cfg.n_iterations == 0 {
        return Ok(prepared);
    }
    let (w, h) = img.dims();
    let planes = [0, 1, 2].map(|c| retinex_channel(prepared.plane(c), w, h, cfg.n_iterations));
    Image::new(w, h, planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{channel_means, Selection};
    use crate::synth::{apply_cast, render_scene, IlluminantCast, SceneSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_range_channel_unchanged() {
        let img = Image::from_pixels(3, 1, &[[0.0; 3], [100.0; 3], [255.0; 3]]).unwrap();
        assert_eq!(pre_normalize(&img).unwrap(), img);
    }

    #[test]
    fn affine_stretch() {
        let img = Image::from_pixels(3, 1, &[[50.0; 3], [75.0; 3], [100.0; 3]]).unwrap();
        let out = pre_normalize(&img).unwrap();
        assert_eq!(out.plane(0), &[0.0, 127.5, 255.0]);
    }

    #[test]
    fn stretch_hits_exact_extrema() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = Image::from_fn(17, 9, |_, _| [0, 1, 2].map(|_| rng.random_range(20.0..230.0))).unwrap();
        let out = pre_normalize(&img).unwrap();
        for c in 0..3 {
            let p = out.plane(c);
            assert_eq!(p.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
            assert_eq!(p.iter().copied().fold(f64::NEG_INFINITY, f64::max), 255.0);
        }
    }

    #[test]
    fn constant_channel_rejected() {
        let img = Image::from_pixels(2, 1, &[[1.0, 5.0, 3.0], [2.0, 5.0, 4.0]]).unwrap();
        assert!(matches!(pre_normalize(&img), Err(Error::DegenerateChannel { channel: 1 })));
    }

    #[test]
    fn constant_image_is_a_fixpoint() {
        let img = Image::filled(33, 20, [100.0, 50.0, 200.0]).unwrap();
        let cfg = RetinexConfig {
            pre_normalize: false,
            ..Default::default()
        };
        let out = retinex(&img, &cfg).unwrap();
        for c in 0..3 {
            for (a, b) in out.plane(c).iter().zip(img.plane(c)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_iterations_is_the_stretch() {
        let (img, _) = render_scene(&SceneSpec {
            width: 64,
            height: 64,
            n_cells: 4,
            ..SceneSpec::default()
        })
        .unwrap();
        let cfg = RetinexConfig {
            n_iterations: 0,
            pre_normalize: true,
        };
        assert_eq!(retinex(&img, &cfg).unwrap(), pre_normalize(&img).unwrap());
    }

    #[test]
    fn reduces_a_uniform_cast() {
        let (scene, _) = render_scene(&SceneSpec {
            width: 128,
            height: 128,
            n_cells: 8,
            ..SceneSpec::default()
        })
        .unwrap();
        let cast = apply_cast(&scene, &IlluminantCast::new(1.1, 0.8, 0.5).unwrap());
        let spread = |img: &Image| {
            let m = channel_means(img, Selection::All).unwrap().0;
            m.iter().copied().fold(f64::MIN, f64::max) - m.iter().copied().fold(f64::MAX, f64::min)
        };
        let out = retinex(&cast, &RetinexConfig::default()).unwrap();
        assert!(spread(&out) < spread(&cast));
    }

    #[test]
    fn bounded_deterministic_and_channel_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let img = Image::from_fn(31, 22, |_, _| [0, 1, 2].map(|_| rng.random_range(0.0..255.0))).unwrap();
        let cfg = RetinexConfig::default();
        let out = retinex(&img, &cfg).unwrap();
        assert_eq!(out, retinex(&img, &cfg).unwrap());
        let pre = pre_normalize(&img).unwrap();
        for c in 0..3 {
            let max = pre.plane(c).iter().copied().fold(f64::MIN, f64::max);
            assert!(out.plane(c).iter().all(|&v| v <= max + 1e-9 && v >= 0.0));
        }
        let permuted = retinex(&img.permute_channels([2, 0, 1]), &cfg).unwrap();
        assert_eq!(permuted, out.permute_channels([2, 0, 1]));
    }

    #[test]
    fn tiny_images() {
        let img = Image::from_pixels(1, 2, &[[10.0; 3], [20.0; 3]]).unwrap();
        let out = retinex(&img, &RetinexConfig::default()).unwrap();
        assert_eq!(out.dims(), (1, 2));
    }

    #[test]
    fn pyramid_stops_at_two_pixels() {
        let levels = pyramid(37, 9, vec![0.0; 37 * 9]);
        let dims: Vec<_> = levels.iter().map(|l| (l.width, l.height)).collect();
        assert_eq!(dims, vec![(37, 9), (19, 5), (10, 3), (5, 2)]);
    }
}
