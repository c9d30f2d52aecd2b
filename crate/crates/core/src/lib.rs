//! Color normalization for two-class microscopy images.
//!
//! Thin blood films split cleanly into cells (foreground) and plasma
//! (background). The plasma is colorless under ideal lighting, so its
//! average color estimates the illuminant; the cells are then matched to
//! reference means recorded under a canonical illuminant. This crate provides
//! that two-stage normalizer alongside the gray-world and Retinex baselines,
//! the binarization front end, angular-error evaluation and a synthetic
//! scene generator with exact ground truth.
//!
//! ```
//! use plasmanorm::{binarize, normalize, synth};
//!
//! let (scene, _truth) = synth::render_scene(&synth::SceneSpec::default())?;
//! let cast = synth::IlluminantCast::new(0.7, 1.1, 0.9)?;
//! let captured = synth::apply_cast(&scene, &cast);
//!
//! let mask = binarize::binarize(&captured, &binarize::BinarizeConfig::default())?;
//! let profile = normalize::ReferenceProfile::default();
//! let result = normalize::fg_bg_gray_world(&captured, &mask, &profile)?;
//! assert!(result.foreground_transform.is_some());
//! # Ok::<(), plasmanorm::Error>(())
//! ```

pub mod binarize;
pub mod error;
pub mod evaluate;
pub mod image;
pub mod io;
pub mod morphology;
pub mod normalize;
pub mod retinex;
pub mod synth;

pub use error::{Error, Result};
pub use image::{
    apply_diagonal, channel_means, encode_quantize, BinaryMask, ChannelMeans, DiagonalTransform,
    Image, Label, Selection,
};

// Book chapters compile and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/diagonal-model.md")]
    mod diagonal_model {}
    #[doc = include_str!("../../../book/src/gray-world.md")]
    mod gray_world {}
    #[doc = include_str!("../../../book/src/fg-bg.md")]
    mod fg_bg {}
    #[doc = include_str!("../../../book/src/binarization.md")]
    mod binarization {}
    #[doc = include_str!("../../../book/src/retinex.md")]
    mod retinex {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic-scenes.md")]
    mod synthetic_scenes {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
