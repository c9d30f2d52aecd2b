//! Foreground/background separation.
//!
//! Two methods are provided. [`Method::Otsu`] thresholds the working channel
//! once at the between-class-variance optimum. [`Method::AreaMorphDouble`]
//! first estimates the dominant cell area with an area-opening
//! granulometry, uses it to despeckle the channel before locating the
//! histogram valley, and then grows conservative seeds inside a permissive
//! region by morphological reconstruction.
//!
//! Cells are darker than plasma, so the dark side of every threshold is the
//! foreground.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{quantize_value, BinaryMask, Image, BLUE, GREEN, RED};
use crate::morphology::{area_close, area_open, reconstruct};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Otsu,
    AreaMorphDouble,
}

/// Channel the thresholds operate on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkingChannel {
    Green,
    /// Rec. 601 luma.
    Luminance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarizeConfig {
    pub method: Method,
    pub working_channel: WorkingChannel,
    /// Levels below the valley where seeds start.
    pub strong_offset: u8,
    /// Levels above the valley the permissive region extends to.
    pub weak_offset: u8,
    pub min_cell_area: usize,
    pub max_cell_area: usize,
    /// Ratio between consecutive areas of the granulometry ladder.
    pub area_step: f64,
    /// Minimum share of the total contrast a ladder step must remove for a
    /// blob size to be reported.
    pub min_energy_fraction: f64,
}

impl Default for BinarizeConfig {
    fn default() -> Self {
        Self {
            method: Method::AreaMorphDouble,
            working_channel: WorkingChannel::Green,
            strong_offset: 10,
            weak_offset: 25,
            min_cell_area: 20,
            max_cell_area: 10_000,
            area_step: 1.5,
            min_energy_fraction: 0.05,
        }
    }
}

impl BinarizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_cell_area == 0 || self.min_cell_area >= self.max_cell_area {
            return Err(Error::InvalidConfig(format!(
                "cell area bounds must satisfy 0 < min < max, got {}..{}",
                self.min_cell_area, self.max_cell_area
            )));
        }
        if !(self.area_step > 1.0 && self.area_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "area step must exceed 1, got {}",
                self.area_step
            )));
        }
        if !(0.0..1.0).contains(&self.min_energy_fraction) {
            return Err(Error::InvalidConfig(format!(
                "energy fraction must lie in [0, 1), got {}",
                self.min_energy_fraction
            )));
        }
        Ok(())
    }
}

/// Working channel quantized to 256 bins.
pub fn working_values(img: &Image, channel: WorkingChannel) -> Vec<u8> {
    match channel {
        WorkingChannel::Green => img.plane(GREEN).iter().map(|&v| quantize_value(v)).collect(),
        WorkingChannel::Luminance => img
            .pixels()
            .map(|p| quantize_value(0.299 * p[RED] + 0.587 * p[GREEN] + 0.114 * p[BLUE]))
            .collect(),
    }
}

pub fn histogram(values: &[u8]) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in values {
        hist[v as usize] += 1;
    }
    hist
}

/// Scaled between-class variance for every candidate threshold `t`, where
/// the lower class is `value <= t`. `None` marks splits with an empty class.
///
/// The score is `(S0*N - S*n0)^2 / (n0*n1)`, built from exact integer sums so
/// equal splits produce bit-identical scores.
fn between_class_scores(hist: &[u64; 256]) -> [Option<f64>; 256] {
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(v, &c)| v as u64 * c).sum();
    let mut scores = [None; 256];
    let (mut n0, mut s0) = (0u64, 0u64);
    for t in 0..256 {
        n0 += hist[t];
        s0 += t as u64 * hist[t];
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = s0 as i128 * total as i128 - total_sum as i128 * n0 as i128;
        let diff = diff as f64;
        scores[t] = Some(diff * diff / (n0 as f64 * n1 as f64));
    }
    scores
}

/// Contiguous run of thresholds sharing the maximal score, starting at the
/// lowest maximizer.
pub fn otsu_plateau(hist: &[u64; 256]) -> Result<(u8, u8)> {
    let scores = between_class_scores(hist);
    let mut best: Option<(usize, f64)> = None;
    for (t, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((t, s));
            }
        }
    }
    let (lo, max) = best.ok_or(Error::DegenerateHistogram)?;
    let mut hi = lo;
    while hi < 255 && scores[hi + 1] == Some(max) {
        hi += 1;
    }
    Ok((lo as u8, hi as u8))
}

/// Otsu threshold of a histogram, lowest maximizer on ties.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> Result<u8> {
    otsu_plateau(hist).map(|(lo, _)| lo)
}

/// Otsu threshold of the working channel; pixels `<= t` are foreground.
pub fn otsu_threshold(img: &Image, channel: WorkingChannel) -> Result<u8> {
    otsu_from_histogram(&histogram(&working_values(img, channel)))
}

fn area_ladder(cfg: &BinarizeConfig) -> Vec<usize> {
    let mut ladder = vec![cfg.min_cell_area];
    loop {
        let last = *ladder.last().expect("non-empty");
        let next = ((last as f64 * cfg.area_step).ceil() as usize).max(last + 1);
        if next >= cfg.max_cell_area {
            ladder.push(cfg.max_cell_area);
            return ladder;
        }
        ladder.push(next);
    }
}

/// Remaining volume of the inverted working channel after area opening at
/// each rung of the ladder.
pub fn granulometry(img: &Image, cfg: &BinarizeConfig) -> Result<Vec<(usize, u64)>> {
    cfg.validate()?;
    let (w, h) = img.dims();
    let inverted: Vec<u8> = working_values(img, cfg.working_channel)
        .into_iter()
        .map(|v| 255 - v)
        .collect();
    Ok(area_ladder(cfg)
        .into_iter()
        .map(|area| {
            let opened = area_open(&inverted, w, h, area);
            (area, opened.iter().map(|&v| v as u64).sum())
        })
        .collect())
}

/// Dominant blob area: the ladder interval where the granulometry loses the
/// most volume, reported as the geometric mean of its ends.
pub fn estimate_cell_area(img: &Image, cfg: &BinarizeConfig) -> Result<usize> {
    let curve = granulometry(img, cfg)?;
    let inverted_min = working_values(img, cfg.working_channel)
        .into_iter()
        .max()
        .map_or(0, |v| 255 - v as u64);
    let contrast: u64 = working_values(img, cfg.working_channel)
        .into_iter()
        .map(|v| 255 - v as u64 - inverted_min)
        .sum();

    let mut best: Option<(usize, u64)> = None;
    for k in 0..curve.len() - 1 {
        let drop = curve[k].1 - curve[k + 1].1;
        if best.is_none_or(|(_, d)| drop > d) {
            best = Some((k, drop));
        }
    }
    let (k, drop) = best.ok_or(Error::NoBlobsFound)?;
    if contrast == 0 || drop == 0 || (drop as f64) < cfg.min_energy_fraction * contrast as f64 {
        return Err(Error::NoBlobsFound);
    }
    Ok(((curve[k].0 * curve[k + 1].0) as f64).sqrt().round() as usize)
}

/// Seeds at `<= valley - strong_offset`, grown by reconstruction inside
/// `<= valley + weak_offset`.
pub fn hysteresis_mask(
    img: &Image,
    channel: WorkingChannel,
    valley: u8,
    strong_offset: u8,
    weak_offset: u8,
) -> Result<BinaryMask> {
    let values = working_values(img, channel);
    let strong = valley as i32 - strong_offset as i32;
    let weak = valley as i32 + weak_offset as i32;
    let seed: Vec<bool> = values.iter().map(|&v| (v as i32) <= strong).collect();
    let permissive: Vec<bool> = values.iter().map(|&v| (v as i32) <= weak).collect();
    let (w, h) = img.dims();
    BinaryMask::new(w, h, reconstruct(&seed, &permissive, w, h))
}

/// Intermediate quantities of the double-threshold method.
#[derive(Clone, Debug)]
pub struct DoubleThreshold {
    pub cell_area: usize,
    pub valley: u8,
    pub strong: i32,
    pub weak: i32,
    pub mask: BinaryMask,
}

pub fn double_threshold(img: &Image, cfg: &BinarizeConfig) -> Result<DoubleThreshold> {
    cfg.validate()?;
    let values = working_values(img, cfg.working_channel);
    // fail on flat channels before the granulometry does
    otsu_from_histogram(&histogram(&values))?;

    let cell_area = estimate_cell_area(img, cfg)?;
    let speckle = (cell_area / 4).max(2);
    let (w, h) = img.dims();
    let cleaned = area_close(&area_open(&values, w, h, speckle), w, h, speckle);
    let (lo, hi) = otsu_plateau(&histogram(&cleaned))?;
    let valley = ((lo as u16 + hi as u16) / 2) as u8;

    let mask = hysteresis_mask(
        img,
        cfg.working_channel,
        valley,
        cfg.strong_offset,
        cfg.weak_offset,
    )?;
    Ok(DoubleThreshold {
        cell_area,
        valley,
        strong: valley as i32 - cfg.strong_offset as i32,
        weak: valley as i32 + cfg.weak_offset as i32,
        mask,
    })
}

pub fn double_threshold_mask(img: &Image, cfg: &BinarizeConfig) -> Result<BinaryMask> {
    double_threshold(img, cfg).map(|d| d.mask)
}

/// Otsu mask: foreground is the dark side of the threshold.
pub fn otsu_mask(img: &Image, channel: WorkingChannel) -> Result<BinaryMask> {
    let values = working_values(img, channel);
    let t = otsu_from_histogram(&histogram(&values))?;
    BinaryMask::new(
        img.width(),
        img.height(),
        values.iter().map(|&v| v <= t).collect(),
    )
}

pub fn binarize(img: &Image, cfg: &BinarizeConfig) -> Result<BinaryMask> {
    cfg.validate()?;
    match cfg.method {
        Method::Otsu => otsu_mask(img, cfg.working_channel),
        Method::AreaMorphDouble => double_threshold_mask(img, cfg),
    }
}
