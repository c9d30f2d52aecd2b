//! Exit-gate checks. One line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p plasmanorm --test acceptance`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::time::{Duration, Instant};

use plasmanorm::binarize::{binarize, otsu_from_histogram, BinarizeConfig, Method};
use plasmanorm::evaluate::{
    angular_error, convergence_trace, pairwise_comparison, rms_angular_error, ZeroPolicy,
};
use plasmanorm::image::quantized;
use plasmanorm::normalize::{fg_bg_gray_world, gray_world, GrayTarget, ReferenceProfile};
use plasmanorm::retinex::{retinex, RetinexConfig};
use plasmanorm::synth::{apply_cast, cast_variants, render_scene, CastBenchmark, IlluminantCast, SceneSpec};
use plasmanorm::{channel_means, ChannelMeans, Image, Selection};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> Image {
    Image::from_fn(w, h, |_, _| [0, 1, 2].map(|_| rng.random_range(lo..hi))).unwrap()
}

fn scene(seed: u64) -> SceneSpec {
    SceneSpec {
        width: 128,
        height: 128,
        n_cells: 12,
        seed,
        ..SceneSpec::default()
    }
}

fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    (0..3)
        .flat_map(|c| a.plane(c).iter().zip(b.plane(c)).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

fn max_mean_error(m: ChannelMeans, target: [f64; 3]) -> f64 {
    (0..3).map(|c| (m.0[c] - target[c]).abs()).fold(0.0, f64::max)
}

/// Angle from the cross product, independent of the acos form.
fn oracle_angle(p: [f64; 3], q: [f64; 3]) -> f64 {
    let cross = [
        p[1] * q[2] - p[2] * q[1],
        p[2] * q[0] - p[0] * q[2],
        p[0] * q[1] - p[1] * q[0],
    ];
    let c = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    c.atan2(p[0] * q[0] + p[1] * q[1] + p[2] * q[2])
}

fn metric_exactness() -> Check {
    let cases = [
        ([120.0, 80.0, 40.0], [120.0, 80.0, 40.0], 0.0),
        ([3.0, 0.0, 0.0], [0.0, 7.0, 0.0], FRAC_PI_2),
        ([0.0, 0.0, 2.0], [0.0, 5.0, 5.0], FRAC_PI_4),
        ([1.0, 1.0, 0.0], [1.0, 0.0, 0.0], FRAC_PI_4),
    ];
    for (p, q, want) in cases {
        let got = angular_error(p, q).map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= 1e-12, || format!("angle {p:?} {q:?} = {got}, want {want}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_image(&mut rng, 64, 64, 1.0, 255.0);
        let b = random_image(&mut rng, 64, 64, 1.0, 255.0);
        let mut acc = 0.0;
        for y in 0..64 {
            for x in 0..64 {
                acc += oracle_angle(a.pixel(x, y), b.pixel(x, y)).powi(2);
            }
        }
        let oracle = (acc / 4096.0).sqrt();
        let got = rms_angular_error(&a, &b, ZeroPolicy::Strict).map_err(|e| e.to_string())?.rms;
        worst = worst.max((got - oracle).abs());
    }
    ensure(worst <= 1e-12, || format!("rms deviates from oracle by {worst:e}"))?;
    Ok(format!("max rms deviation {worst:.1e}"))
}

fn gray_world_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let (w, h) = (rng.random_range(8..96), rng.random_range(8..96));
        let img = random_image(&mut rng, w, h, 1.0, 255.0);
        let target = if i % 2 == 0 {
            GrayTarget::default()
        } else {
            GrayTarget::new(ChannelMeans([0, 1, 2].map(|_| rng.random_range(20.0..240.0)))).unwrap()
        };
        let out = gray_world(&img, &target).map_err(|e| e.to_string())?.output;
        let means = channel_means(&out, Selection::All).map_err(|e| e.to_string())?;
        worst = worst.max(max_mean_error(means, target.levels().0));
    }
    ensure(worst <= 1e-9, || format!("mean error {worst:e}"))?;
    Ok(format!("max mean error {worst:.1e}"))
}

fn fg_bg_contract() -> Check {
    let profile = ReferenceProfile::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xf6);
    let (mut worst_bg, mut worst_fg): (f64, f64) = (0.0, 0.0);
    for seed in 0..50 {
        let (img, mask) = render_scene(&scene(seed)).map_err(|e| e.to_string())?;
        let cast = IlluminantCast::random(&mut rng, 0.6, 1.4).map_err(|e| e.to_string())?;
        let res = fg_bg_gray_world(&apply_cast(&img, &cast), &mask, &profile).map_err(|e| e.to_string())?;
        let bg = channel_means(&res.output, Selection::Background(&mask)).map_err(|e| e.to_string())?;
        let fg = channel_means(&res.output, Selection::Foreground(&mask)).map_err(|e| e.to_string())?;
        worst_bg = worst_bg.max(max_mean_error(bg, [255.0; 3]));
        worst_fg = worst_fg.max(max_mean_error(fg, [183.0, 189.0, 214.0]));
    }
    ensure(worst_bg <= 1e-9 && worst_fg <= 1e-9, || {
        format!("background error {worst_bg:e}, foreground error {worst_fg:e}")
    })?;
    Ok(format!("background {worst_bg:.1e}, foreground {worst_fg:.1e}"))
}

fn cast_invariance() -> Check {
    let profile = ReferenceProfile::default();
    let spec = SceneSpec {
        seed: 2024,
        ..SceneSpec::default()
    };
    let bench = CastBenchmark {
        seed: 15,
        ..CastBenchmark::default()
    };
    let variants = cast_variants(&spec, &bench).map_err(|e| e.to_string())?;
    ensure(variants.len() == 15, || format!("{} variants", variants.len()))?;
    let outputs: Vec<Image> = variants
        .iter()
        .map(|v| fg_bg_gray_world(&v.image, &v.mask, &profile).map(|r| r.output))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut float_worst: f64 = 0.0;
    for i in 0..outputs.len() {
        for j in i + 1..outputs.len() {
            float_worst = float_worst.max(max_abs_diff(&outputs[i], &outputs[j]));
        }
    }
    let q: Vec<Image> = outputs.iter().map(quantized).collect();
    let report = pairwise_comparison(&q).map_err(|e| e.to_string())?;
    let quant_worst = report.matrix.iter().flatten().copied().fold(0.0, f64::max);
    ensure(float_worst <= 1e-9, || format!("float outputs differ by {float_worst:e}"))?;
    ensure(quant_worst < 0.01, || format!("quantized pairwise rms {quant_worst}"))?;
    Ok(format!("float {float_worst:.1e}, quantized rms {quant_worst:.2e} rad"))
}

fn convergence() -> Check {
    let profile = ReferenceProfile::default();
    let (img, mask) = render_scene(&scene(77)).map_err(|e| e.to_string())?;
    let cast = apply_cast(&img, &IlluminantCast::new(1.3, 0.75, 0.6).unwrap());

    let float = convergence_trace(&cast, &mask, &profile, 5, false).map_err(|e| e.to_string())?;
    let float_dev = float.iterations[1].max_deviation();
    ensure(float_dev <= 1e-9, || format!("float iteration 2 deviation {float_dev:e}"))?;

    let quant = convergence_trace(&quantized(&cast), &mask, &profile, 5, true).map_err(|e| e.to_string())?;
    let devs: Vec<f64> = quant.iterations.iter().map(|s| s.max_deviation()).collect();
    ensure(devs[1] <= 1e-2, || format!("quantized iteration 2 deviation {}", devs[1]))?;
    ensure(devs.windows(2).all(|w| w[1] <= w[0]), || format!("deviation increases: {devs:?}"))?;
    Ok(format!("float {float_dev:.1e}, quantized {:.1e}", devs[1]))
}

fn superiority() -> Check {
    let profile = ReferenceProfile::default();
    let gray = GrayTarget::default();
    let seeds = 20;
    let mut wins = 0;
    let mut failures = Vec::new();
    for seed in 0..seeds {
        let spec = scene(1000 + seed);
        let bench = CastBenchmark {
            stain_range: (0.8, 1.25),
            independent_noise: true,
            seed: 5000 + seed,
            ..CastBenchmark::default()
        };
        let variants = cast_variants(&spec, &bench).map_err(|e| e.to_string())?;
        let (mut raw, mut gw, mut fgbg) = (Vec::new(), Vec::new(), Vec::new());
        for v in &variants {
            let captured = quantized(&v.image);
            gw.push(quantized(&gray_world(&captured, &gray).map_err(|e| e.to_string())?.output));
            fgbg.push(quantized(
                &fg_bg_gray_world(&captured, &v.mask, &profile).map_err(|e| e.to_string())?.output,
            ));
            raw.push(captured);
        }
        let total = |set: &[Image]| pairwise_comparison(set).map(|r| r.total()).map_err(|e| e.to_string());
        let (r, g, f) = (total(&raw)?, total(&gw)?, total(&fgbg)?);
        if f <= g && f < r && g < r {
            wins += 1;
        } else {
            failures.push(format!("seed {}: raw {r:.3} gw {g:.3} fg-bg {f:.3}", 1000 + seed));
        }
    }
    let rate = wins as f64 / seeds as f64;
    ensure(rate >= 0.95, || format!("{wins}/{seeds} seeds; {}", failures.join("; ")))?;
    Ok(format!("{wins}/{seeds} seeds"))
}

/// Exhaustive scan with exact rational comparison of between-class variance.
fn otsu_exhaustive(hist: &[u64; 256]) -> Option<u8> {
    let mut best: Option<(usize, u128, u128)> = None;
    for t in 0..255 {
        let (mut n0, mut s0, mut n1, mut s1) = (0u128, 0u128, 0u128, 0u128);
        for (v, &c) in hist.iter().enumerate() {
            let (n, s) = if v <= t { (&mut n0, &mut s0) } else { (&mut n1, &mut s1) };
            *n += c as u128;
            *s += v as u128 * c as u128;
        }
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let d = (s0 * n1).abs_diff(s1 * n0);
        let (num, den) = (d * d, n0 * n1);
        match best {
            Some((_, bn, bd)) if num * bd <= bn * den => {}
            _ => best = Some((t, num, den)),
        }
    }
    best.map(|(t, _, _)| t as u8)
}

fn random_histogram(rng: &mut ChaCha8Rng) -> [u64; 256] {
    let mut hist = [0u64; 256];
    match rng.random_range(0..3) {
        0 => hist.iter_mut().for_each(|h| *h = rng.random_range(0..200)),
        1 => {
            for _ in 0..rng.random_range(2..8) {
                hist[rng.random_range(0..256)] += rng.random_range(1..5000);
            }
        }
        _ => {
            let (a, b) = (rng.random_range(20.0..120.0), rng.random_range(130.0..240.0));
            for _ in 0..20_000 {
                let centre = if rng.random_bool(0.4) { a } else { b };
                let v = (centre + rng.random_range(-25.0..25.0f64)).clamp(0.0, 255.0);
                hist[v as usize] += 1;
            }
        }
    }
    hist
}

fn otsu_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x075);
    let mut checked = 0;
    while checked < 200 {
        let hist = random_histogram(&mut rng);
        let Some(want) = otsu_exhaustive(&hist) else {
            continue;
        };
        let got = otsu_from_histogram(&hist).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("threshold {got}, exhaustive scan {want}"))?;
        checked += 1;
    }
    Ok(format!("{checked} histograms"))
}

fn binarization_quality() -> Check {
    let mut worst = f64::INFINITY;
    for method in [Method::Otsu, Method::AreaMorphDouble] {
        let cfg = BinarizeConfig {
            method,
            ..BinarizeConfig::default()
        };
        for (seed, sigma) in [(1, 0.0), (2, 1.0), (3, 2.5), (4, 4.0), (5, 5.0), (6, 5.0)] {
            let spec = SceneSpec {
                seed,
                noise_sigma: sigma,
                ..SceneSpec::default()
            };
            let (img, truth) = render_scene(&spec).map_err(|e| e.to_string())?;
            let mask = binarize(&img, &cfg).map_err(|e| e.to_string())?;
            let iou = mask.foreground_iou(&truth).map_err(|e| e.to_string())?;
            ensure(iou >= 0.95, || format!("{method:?} seed {seed} sigma {sigma}: IoU {iou:.4}"))?;
            worst = worst.min(iou);
        }
    }
    Ok(format!("min IoU {worst:.4}"))
}

fn retinex_sanity() -> Check {
    let fixed = RetinexConfig {
        pre_normalize: false,
        ..RetinexConfig::default()
    };
    for color in [[100.0, 50.0, 200.0], [255.0, 255.0, 255.0], [1.0, 30.0, 7.0]] {
        let img = Image::filled(45, 31, color).unwrap();
        let out = retinex(&img, &fixed).map_err(|e| e.to_string())?;
        let dev = max_abs_diff(&out, &img);
        ensure(dev <= 1e-9, || format!("constant {color:?} moved by {dev:e}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e7);
    for _ in 0..5 {
        let (img, _) = render_scene(&scene(rng.random())).map_err(|e| e.to_string())?;
        let img = apply_cast(&img, &IlluminantCast::random(&mut rng, 0.6, 1.0).unwrap());
        for cfg in [fixed, RetinexConfig::default()] {
            let out = retinex(&img, &cfg).map_err(|e| e.to_string())?;
            let again = retinex(&img, &cfg).map_err(|e| e.to_string())?;
            ensure(out == again, || "retinex is not deterministic".into())?;
            for c in 0..3 {
                let bound = if cfg.pre_normalize {
                    255.0
                } else {
                    img.plane(c).iter().copied().fold(f64::MIN, f64::max)
                };
                let top = out.plane(c).iter().copied().fold(f64::MIN, f64::max);
                ensure(top <= bound + 1e-9, || format!("channel {c} reaches {top} above {bound}"))?;
                ensure(out.plane(c).iter().all(|&v| v >= 0.0), || format!("channel {c} negative"))?;
            }
        }
    }
    Ok("fixpoint, bounded, deterministic".into())
}

fn profile_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9f);
    for _ in 0..100 {
        let mu = [0, 1, 2].map(|_| {
            let v: f64 = rng.random_range(0.0..255.0);
            if v == 0.0 {
                255.0
            } else {
                v
            }
        });
        let names = (0..rng.random_range(1..4)).map(|k| format!("img-{k}-{}", rng.random::<u32>())).collect();
        let p = ReferenceProfile::new(ChannelMeans(mu), rng.random_range(1..500), names).map_err(|e| e.to_string())?;
        let back = ReferenceProfile::from_json(&p.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let same_bits = (0..3).all(|c| back.mu_c().0[c].to_bits() == p.mu_c().0[c].to_bits());
        ensure(same_bits && back == p, || format!("{p:?} came back as {back:?}"))?;
    }
    Ok("100 profiles".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check, Duration); 10] = [
        ("metric exactness", metric_exactness, Duration::from_secs(5)),
        ("gray world means", gray_world_contract, Duration::from_secs(2)),
        ("fg-bg gray world means", fg_bg_contract, Duration::from_secs(5)),
        ("cast invariance", cast_invariance, Duration::from_secs(10)),
        ("convergence", convergence, Duration::from_secs(5)),
        ("superiority over gray world", superiority, Duration::from_secs(60)),
        ("otsu oracle equivalence", otsu_oracle, Duration::from_secs(2)),
        ("binarization quality", binarization_quality, Duration::from_secs(10)),
        ("retinex sanity", retinex_sanity, Duration::from_secs(10)),
        ("profile round trip", profile_round_trip, Duration::from_secs(1)),
    ];
    let mut failed = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; over budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {name} ({:.3}s, budget {}s): {detail}", elapsed.as_secs_f64(), budget.as_secs()),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name} ({:.3}s, budget {}s): {why}", elapsed.as_secs_f64(), budget.as_secs());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
