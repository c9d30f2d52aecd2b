mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use plasmanorm::binarize::{binarize, BinarizeConfig, Method, WorkingChannel};
use plasmanorm::evaluate::{convergence_trace_with, pairwise_comparison_named, ConvergenceOptions};
use plasmanorm::io::{decode_mask, encode_image, encode_mask, read_image, RasterFormat};
use plasmanorm::normalize::{
    database_gray_world, fg_bg_gray_world_with, gray_world, FgBgConfig, GrayTarget,
    NormalizationResult, ReferenceBuilder, ReferenceProfile,
};
use plasmanorm::retinex::{retinex, RetinexConfig};
use plasmanorm::synth::{apply_cast, render_scene, IlluminantCast, SceneSpec};
use plasmanorm::{BinaryMask, DiagonalTransform, Image, Selection};

use manifest::{manifest_path_for, write_atomic, RunManifest};

#[derive(Parser)]
#[command(name = "plasmanorm", version, about = "Color normalization for blood-film images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment cells from plasma, writing one `<stem>_mask.png` per input.
    Binarize(BinarizeArgs),
    /// Pool foreground means of image/mask pairs into a reference profile.
    BuildReference(BuildReferenceArgs),
    /// Apply one normalization algorithm to an image.
    Normalize(NormalizeArgs),
    /// Pairwise RMS angular differences between aligned images.
    Evaluate(EvaluateArgs),
    /// Re-apply FG-BG normalization to its own output k times.
    Convergence(ConvergenceArgs),
    /// Render a synthetic blood-film scene with its ground-truth mask.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Otsu,
    AreaMorphDouble,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Green,
    Luminance,
}

#[derive(clap::Args)]
struct BinarizeFlags {
    #[arg(long, value_enum, default_value = "area-morph-double")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "green")]
    channel: ChannelArg,
    #[arg(long, default_value_t = 10)]
    strong_offset: u8,
    #[arg(long, default_value_t = 25)]
    weak_offset: u8,
    #[arg(long, default_value_t = 20)]
    min_cell_area: usize,
    #[arg(long, default_value_t = 10000)]
    max_cell_area: usize,
}

impl BinarizeFlags {
    fn config(&self) -> Result<BinarizeConfig> {
        let cfg = BinarizeConfig {
            method: match self.method {
                MethodArg::Otsu => Method::Otsu,
                MethodArg::AreaMorphDouble => Method::AreaMorphDouble,
            },
            working_channel: match self.channel {
                ChannelArg::Green => WorkingChannel::Green,
                ChannelArg::Luminance => WorkingChannel::Luminance,
            },
            strong_offset: self.strong_offset,
            weak_offset: self.weak_offset,
            min_cell_area: self.min_cell_area,
            max_cell_area: self.max_cell_area,
            ..BinarizeConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(clap::Args)]
struct BinarizeArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    flags: BinarizeFlags,
}

#[derive(clap::Args)]
struct BuildReferenceArgs {
    /// Reference image; pair each with a `--mask`, in order.
    #[arg(long = "image", required_unless_present = "default")]
    images: Vec<PathBuf>,
    #[arg(long = "mask")]
    masks: Vec<PathBuf>,
    /// Write the built-in default profile instead.
    #[arg(long, conflicts_with_all = ["images", "masks"])]
    default: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algorithm {
    Gw,
    GwDb,
    FgBgGw,
    Retinex,
}

impl Algorithm {
    fn name(self) -> &'static str {
        match self {
            Algorithm::Gw => "gw",
            Algorithm::GwDb => "gw-db",
            Algorithm::FgBgGw => "fg-bg-gw",
            Algorithm::Retinex => "retinex",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionArg {
    All,
    Foreground,
    Background,
}

#[derive(clap::Args)]
struct NormalizeArgs {
    input: PathBuf,
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    /// Output image (.png or .ppm).
    #[arg(long)]
    out: PathBuf,
    /// Reference profile JSON; the built-in default is used when absent.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Compute the mask from the input when none is given.
    #[arg(long)]
    auto_binarize: bool,
    #[command(flatten)]
    binarize: BinarizeFlags,
    /// Retinex iterations per pyramid level.
    #[arg(long, default_value_t = 4)]
    iterations: usize,
    #[arg(long)]
    no_pre_normalize: bool,
    /// Gray target for `gw`, one level for all channels.
    #[arg(long, default_value_t = 127.5)]
    gray: f64,
    #[arg(long, default_value_t = 255.0)]
    background_target: f64,
    /// Region for `gw-db`.
    #[arg(long, value_enum, default_value = "all")]
    region: RegionArg,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(num_args = 2.., required = true)]
    images: Vec<PathBuf>,
    /// Pair CSV; `<stem>.json` and `<stem>_sums.csv` are written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ConvergenceArgs {
    input: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    auto_binarize: bool,
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    /// Round to 8 bits between iterations.
    #[arg(long)]
    quantize_between: bool,
    /// Recompute the mask from every iterate.
    #[arg(long)]
    rebinarize: bool,
    #[command(flatten)]
    binarize: BinarizeFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "scene")]
    name: String,
    /// Base scene description as JSON; flags below override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    radius_jitter: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    /// Stain strength exponent applied to the cell color.
    #[arg(long)]
    stain: Option<f64>,
    /// Diagonal cast `r,g,b` applied after rendering.
    #[arg(long, value_parser = parse_triple)]
    cast: Option<[f64; 3]>,
}

fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|p| format!("expected r,g,b, got {} values", p.len()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Binarize(a) => cmd_binarize(a),
        Command::BuildReference(a) => cmd_build_reference(a),
        Command::Normalize(a) => cmd_normalize(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_image(path: &Path) -> Result<Image> {
    read_image(path).with_context(|| format!("reading {}", path.display()))
}

fn load_mask(path: &Path) -> Result<BinaryMask> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_mask(&bytes).with_context(|| format!("decoding {}", path.display()))
}

fn load_profile(path: Option<&Path>) -> Result<ReferenceProfile> {
    match path {
        None => Ok(ReferenceProfile::default()),
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ReferenceProfile::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn save_image(path: &Path, img: &Image) -> Result<()> {
    let bytes = encode_image(img, RasterFormat::from_path(path)?)?;
    write_atomic(path, &bytes)
}

fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    write_atomic(path, &encode_mask(mask)?)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

fn cmd_binarize(a: BinarizeArgs) -> Result<bool> {
    let cfg = a.flags.config()?;
    let mut m = RunManifest::start("binarize");
    m.algorithm = Some(serde_json::to_value(cfg.method)?.as_str().unwrap_or_default().to_string());
    m.config = serde_json::to_value(&cfg)?;
    std::fs::create_dir_all(&a.out)?;
    for input in &a.inputs {
        m.inputs.push(input.clone());
        let out = a.out.join(format!("{}_mask.png", stem(input)));
        let run = || -> Result<()> {
            let mask = binarize(&load_image(input)?, &cfg)?;
            save_mask(&out, &mask)
        };
        match run() {
            Ok(()) => m.outputs.push(out),
            Err(e) => m.fail(input, e),
        }
    }
    m.finish(&a.out.join("manifest.json"))
}

fn cmd_build_reference(a: BuildReferenceArgs) -> Result<bool> {
    let mut m = RunManifest::start("build-reference");
    let profile = if a.default {
        ReferenceProfile::default()
    } else {
        if a.images.len() != a.masks.len() {
            Cli::command()
                .error(
                    clap::error::ErrorKind::WrongNumberOfValues,
                    format!("{} images but {} masks", a.images.len(), a.masks.len()),
                )
                .exit();
        }
        let mut builder = ReferenceBuilder::new();
        for (img, mask) in a.images.iter().zip(&a.masks) {
            m.inputs.push(img.clone());
            m.inputs.push(mask.clone());
            builder
                .add(img.display().to_string(), &load_image(img)?, &load_mask(mask)?)
                .with_context(|| format!("{} with {}", img.display(), mask.display()))?;
        }
        builder.finish()?
    };
    write_atomic(&a.out, profile.to_json()?.as_bytes())?;
    let mu = profile.mu_c().0;
    println!("{} {} {}", mu[0], mu[1], mu[2]);
    m.outputs.push(a.out.clone());
    m.algorithm = Some(if a.default { "default" } else { "pooled-foreground-means" }.into());
    m.config = json!({ "default": a.default, "masks": a.masks });
    m.transforms = Some(json!({ "mu_c": mu, "n_images": profile.n_images() }));
    m.finish(&manifest_path_for(&a.out))
}

/// Mask from `--mask`, or computed from `img` under `--auto-binarize`.
fn resolve_mask(
    img: &Image,
    mask: Option<&Path>,
    auto: bool,
    flags: &BinarizeFlags,
    m: &mut RunManifest,
) -> Result<BinaryMask> {
    match mask {
        Some(p) => {
            m.inputs.push(p.to_path_buf());
            load_mask(p)
        }
        None if auto => Ok(binarize(img, &flags.config()?)?),
        None => bail!("a mask is required: pass --mask or --auto-binarize"),
    }
}

fn transforms_json(res: &NormalizationResult) -> serde_json::Value {
    match res.foreground_transform {
        Some(f) => json!({ "background": res.transform, "foreground": f }),
        None => json!({ "diagonal": res.transform }),
    }
}

fn cmd_normalize(a: NormalizeArgs) -> Result<bool> {
    let mut m = RunManifest::start("normalize");
    m.algorithm = Some(a.algorithm.name().into());
    m.inputs.push(a.input.clone());
    let img = load_image(&a.input)?;
    let output = match a.algorithm {
        Algorithm::Gw => {
            let res = gray_world(&img, &GrayTarget::uniform(a.gray)?)?;
            m.config = json!({ "gray": a.gray });
            m.transforms = Some(transforms_json(&res));
            res.output
        }
        Algorithm::GwDb => {
            let profile = load_profile(a.profile.as_deref())?;
            if let Some(p) = &a.profile {
                m.inputs.push(p.clone());
            }
            let mask = match a.region {
                RegionArg::All => None,
                _ => Some(resolve_mask(&img, a.mask.as_deref(), a.auto_binarize, &a.binarize, &mut m)?),
            };
            let region = match (a.region, &mask) {
                (RegionArg::Foreground, Some(mk)) => Selection::Foreground(mk),
                (RegionArg::Background, Some(mk)) => Selection::Background(mk),
                _ => Selection::All,
            };
            let res = database_gray_world(&img, &profile, region)?;
            m.config = json!({
                "profile": profile.mu_c().0,
                "region": match a.region {
                    RegionArg::All => "all",
                    RegionArg::Foreground => "foreground",
                    RegionArg::Background => "background",
                },
            });
            m.transforms = Some(transforms_json(&res));
            res.output
        }
        Algorithm::FgBgGw => {
            let profile = load_profile(a.profile.as_deref())?;
            if let Some(p) = &a.profile {
                m.inputs.push(p.clone());
            }
            let mask = resolve_mask(&img, a.mask.as_deref(), a.auto_binarize, &a.binarize, &mut m)?;
            let cfg = FgBgConfig {
                background_target: a.background_target,
            };
            let res = fg_bg_gray_world_with(&img, &mask, &profile, &cfg)?;
            m.config = json!({
                "profile": profile.mu_c().0,
                "background_target": a.background_target,
                "auto_binarize": a.mask.is_none(),
                "binarize": if a.mask.is_none() { Some(a.binarize.config()?) } else { None },
            });
            m.transforms = Some(transforms_json(&res));
            res.output
        }
        Algorithm::Retinex => {
            let cfg = RetinexConfig {
                n_iterations: a.iterations,
                pre_normalize: !a.no_pre_normalize,
            };
            m.config = serde_json::to_value(cfg)?;
            retinex(&img, &cfg)?
        }
    };
    save_image(&a.out, &output)?;
    m.outputs.push(a.out.clone());
    m.finish(&manifest_path_for(&a.out))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_file_name(format!("{}{suffix}", stem(path)))
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<bool> {
    let mut m = RunManifest::start("evaluate");
    m.algorithm = Some("rms-angular-error".into());
    let mut images = Vec::with_capacity(a.images.len());
    for p in &a.images {
        m.inputs.push(p.clone());
        images.push((p.display().to_string(), load_image(p)?));
    }
    for (i, (ia, a_img)) in images.iter().enumerate() {
        for (ib, b_img) in &images[i + 1..] {
            if a_img.dims() != b_img.dims() {
                bail!(
                    "dimension mismatch between {ia} {:?} and {ib} {:?}",
                    a_img.dims(),
                    b_img.dims()
                );
            }
        }
    }
    let named: Vec<(String, &Image)> = images.iter().map(|(id, img)| (id.clone(), img)).collect();
    let report = pairwise_comparison_named(&named)?;

    let json_path = a.out.with_extension("json");
    let sums_path = sibling(&a.out, "_sums.csv");
    let mut pairs = Vec::new();
    for i in 0..report.ids.len() {
        for j in i + 1..report.ids.len() {
            pairs.push(json!({ "pair_id": report.pair_id(i, j), "rms_radians": report.matrix[i][j] }));
        }
    }
    let doc = json!({
        "ids": report.ids,
        "matrix": report.matrix,
        "sums": report.sums,
        "pairs": pairs,
    });
    write_atomic(&a.out, report.pairs_csv().as_bytes())?;
    write_atomic(&json_path, serde_json::to_string_pretty(&doc)?.as_bytes())?;
    write_atomic(&sums_path, report.sums_csv().as_bytes())?;
    m.outputs = vec![a.out.clone(), json_path, sums_path];
    m.config = json!({ "zero_policy": "skip" });
    m.finish(&manifest_path_for(&a.out))
}

fn cmd_convergence(a: ConvergenceArgs) -> Result<bool> {
    let mut m = RunManifest::start("convergence");
    m.algorithm = Some("fg-bg-gw".into());
    m.inputs.push(a.input.clone());
    let img = load_image(&a.input)?;
    let profile = load_profile(a.profile.as_deref())?;
    if let Some(p) = &a.profile {
        m.inputs.push(p.clone());
    }
    let mask = resolve_mask(&img, a.mask.as_deref(), a.auto_binarize, &a.binarize, &mut m)?;
    let opts = ConvergenceOptions {
        quantize_between: a.quantize_between,
        rebinarize: if a.rebinarize { Some(a.binarize.config()?) } else { None },
    };
    let trace = convergence_trace_with(&img, &mask, &profile, a.iterations, &opts)?;
    write_atomic(&a.out, trace.to_csv().as_bytes())?;
    m.outputs.push(a.out.clone());
    m.config = json!({
        "iterations": a.iterations,
        "quantize_between": a.quantize_between,
        "rebinarize": opts.rebinarize,
        "profile": profile.mu_c().0,
    });
    m.transforms = Some(serde_json::to_value(&trace.iterations)?);
    m.finish(&manifest_path_for(&a.out))
}

fn cmd_synth(a: SynthArgs) -> Result<bool> {
    let mut m = RunManifest::start("synth");
    m.algorithm = Some("disk-scene".into());
    let mut spec = match &a.spec {
        Some(p) => {
            m.inputs.push(p.clone());
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<SceneSpec>(&text)
                .with_context(|| format!("parsing {}", p.display()))?
        }
        None => SceneSpec::default(),
    };
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    if a.noise_seed.is_some() {
        spec.noise_seed = a.noise_seed;
    }
    if let Some(v) = a.width {
        spec.width = v;
    }
    if let Some(v) = a.height {
        spec.height = v;
    }
    if let Some(v) = a.cells {
        spec.n_cells = v;
    }
    if let Some(v) = a.radius {
        spec.cell_radius = v;
    }
    if let Some(v) = a.radius_jitter {
        spec.cell_radius_jitter = v;
    }
    if let Some(v) = a.noise {
        spec.noise_sigma = v;
    }
    if let Some(k) = a.stain {
        spec = spec.with_stain(k);
    }
    let (mut img, mask) = render_scene(&spec)?;
    let mut cast_factors = None;
    if let Some(c) = &a.cast {
        let cast = IlluminantCast::new(c[0], c[1], c[2])?;
        img = apply_cast(&img, &cast);
        cast_factors = Some(cast.0);
    }
    std::fs::create_dir_all(&a.out)?;
    let image_path = a.out.join(format!("{}.png", a.name));
    let mask_path = a.out.join(format!("{}_mask.png", a.name));
    let spec_path = a.out.join(format!("{}.json", a.name));
    save_image(&image_path, &img)?;
    save_mask(&mask_path, &mask)?;
    write_atomic(&spec_path, serde_json::to_string_pretty(&spec)?.as_bytes())?;
    m.outputs = vec![image_path, mask_path, spec_path];
    m.config = serde_json::to_value(&spec)?;
    m.transforms = cast_factors.map(|t: DiagonalTransform| json!({ "cast": t }));
    m.finish(&a.out.join(format!("{}.manifest.json", a.name)))
}

