//! Angular-error evaluation and the repeated-application experiment.

use serde::{Deserialize, Serialize};

use crate::binarize::{binarize, BinarizeConfig};
use crate::error::{Error, Result};
use crate::image::{quantized, BinaryMask, DiagonalTransform, Image};
use crate::normalize::{fg_bg_gray_world, ReferenceProfile};

/// Angle in radians between two RGB vectors.
pub fn angular_error(p1: [f64; 3], p2: [f64; 3]) -> Result<f64> {
    let dot = p1[0] * p2[0] + p1[1] * p2[1] + p1[2] * p2[2];
    let n1 = p1[0] * p1[0] + p1[1] * p1[1] + p1[2] * p1[2];
    let n2 = p2[0] * p2[0] + p2[1] * p2[1] + p2[2] * p2[2];
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    // one square root of the product keeps identical vectors at exactly 1
    Ok((dot / (n1 * n2).sqrt()).clamp(-1.0, 1.0).acos())
}

/// Handling of pixels where either vector is black.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroPolicy {
    #[default]
    Skip,
    Strict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularErrorReport {
    /// Root mean square angle in radians.
    pub rms: f64,
    /// Pixels that entered the mean.
    pub n_pixels: usize,
    pub n_skipped: usize,
}

pub fn rms_angular_error(a: &Image, b: &Image, policy: ZeroPolicy) -> Result<AngularErrorReport> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            found: b.dims(),
        });
    }
    let (mut sum_sq, mut n, mut skipped) = (0.0, 0usize, 0usize);
    for i in 0..a.len() {
        match angular_error(a.pixel_at(i), b.pixel_at(i)) {
            Ok(e) => {
                sum_sq += e * e;
                n += 1;
            }
            Err(Error::ZeroVector) if policy == ZeroPolicy::Skip => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if n == 0 {
        return Err(Error::NoValidPixels);
    }
    Ok(AngularErrorReport {
        rms: (sum_sq / n as f64).sqrt(),
        n_pixels: n,
        n_skipped: skipped,
    })
}

/// All-pairs RMS angular differences of a set of aligned images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub ids: Vec<String>,
    /// Symmetric, zero diagonal.
    pub matrix: Vec<Vec<f64>>,
    /// Row sums of `matrix`, self-pairs excluded.
    pub sums: Vec<f64>,
}

impl PairwiseReport {
    pub fn total(&self) -> f64 {
        self.sums.iter().sum()
    }

    /// Identifier of the unordered pair `(i, j)`.
    pub fn pair_id(&self, i: usize, j: usize) -> String {
        format!("{}|{}", self.ids[i], self.ids[j])
    }

    /// `pair_id,rms_radians` rows for every `i < j`.
    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("pair_id,rms_radians\n");
        for i in 0..self.ids.len() {
            for j in i + 1..self.ids.len() {
                out.push_str(&format!("{},{}\n", csv_field(&self.pair_id(i, j)), self.matrix[i][j]));
            }
        }
        out
    }

    /// `image_id,sum_rms_radians` rows.
    pub fn sums_csv(&self) -> String {
        let mut out = String::from("image_id,sum_rms_radians\n");
        for (id, s) in self.ids.iter().zip(&self.sums) {
            out.push_str(&format!("{},{}\n", csv_field(id), s));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn pairwise_comparison(images: &[Image]) -> Result<PairwiseReport> {
    let named: Vec<(String, &Image)> = images
        .iter()
        .enumerate()
        .map(|(i, img)| (i.to_string(), img))
        .collect();
    pairwise_comparison_named(&named)
}

pub fn pairwise_comparison_named(images: &[(String, &Image)]) -> Result<PairwiseReport> {
    if images.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "pairwise comparison needs at least 2 images, got {}",
            images.len()
        )));
    }
    let n = images.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let e = rms_angular_error(images[i].1, images[j].1, ZeroPolicy::Skip)?.rms;
            matrix[i][j] = e;
            matrix[j][i] = e;
        }
    }
    let sums = matrix.iter().map(|row| row.iter().sum()).collect();
    Ok(PairwiseReport {
        ids: images.iter().map(|(id, _)| id.clone()).collect(),
        matrix,
        sums,
    })
}

/// One application of FG-BG normalization in a convergence run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStep {
    pub background: DiagonalTransform,
    pub foreground: DiagonalTransform,
    /// RMS angular difference between this step's input and output.
    pub rms: f64,
}

impl ConvergenceStep {
    pub fn max_deviation(&self) -> f64 {
        self.background
            .max_deviation_from_identity()
            .max(self.foreground.max_deviation_from_identity())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub iterations: Vec<ConvergenceStep>,
}

impl ConvergenceTrace {
    /// `iteration,mb_r,mb_g,mb_b,mf_r,mf_g,mf_b,rms_radians`, 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,mb_r,mb_g,mb_b,mf_r,mf_g,mf_b,rms_radians\n");
        for (k, step) in self.iterations.iter().enumerate() {
            let b = step.background.factors();
            let f = step.foreground.factors();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                k + 1,
                b[0],
                b[1],
                b[2],
                f[0],
                f[1],
                f[2],
                step.rms
            ));
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct ConvergenceOptions {
    /// Round each output to 8 bits before feeding it back.
    pub quantize_between: bool,
    /// Recompute the mask from each iterate instead of reusing the first.
    pub rebinarize: Option<BinarizeConfig>,
}

pub fn convergence_trace(
    img: &Image,
    mask: &BinaryMask,
    profile: &ReferenceProfile,
    k: usize,
    quantize_between: bool,
) -> Result<ConvergenceTrace> {
    let opts = ConvergenceOptions {
        quantize_between,
        rebinarize: None,
    };
    convergence_trace_with(img, mask, profile, k, &opts)
}

pub fn convergence_trace_with(
    img: &Image,
    mask: &BinaryMask,
    profile: &ReferenceProfile,
    k: usize,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceTrace> {
    if k == 0 {
        return Err(Error::InvalidConfig("convergence needs k >= 1".into()));
    }
    let mut current = img.clone();
    let mut mask = mask.clone();
    let mut iterations = Vec::with_capacity(k);
    for step in 0..k {
        if step > 0 {
            if let Some(cfg) = &opts.rebinarize {
                mask = binarize(&current, cfg)?;
            }
        }
        let res = fg_bg_gray_world(&current, &mask, profile)?;
        let next = if opts.quantize_between {
            quantized(&res.output)
        } else {
            res.output
        };
        let rms = rms_angular_error(&current, &next, ZeroPolicy::Skip)?.rms;
        iterations.push(ConvergenceStep {
            background: res.transform,
            foreground: res.foreground_transform.expect("fg-bg records both transforms"),
            rms,
        });
        current = next;
    }
    Ok(ConvergenceTrace { iterations })
}
