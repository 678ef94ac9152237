//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failures are reported, not fatal, so the rest of the workspace tests still
//! run. Set `ACCEPTANCE_STRICT=1` to exit nonzero on any failure.

mod common;

use std::time::{Duration, Instant};

use mpi_fusion::build::{
    build_mpi_groundtruth, build_mpi_visible, render_layered_scene, synthesize_scene, LayeredScene,
    PosedImage, SceneLayer, SynthParams, TextureStyle,
};
use mpi_fusion::bundle::{bundle_len, decode_mpi, encode_mpi, export_mpi, header_len, import_mpi};
use mpi_fusion::eval::{ablation_render, lfi_render, mean_scene_disparity, psnr, Ablation};
use mpi_fusion::fusion::{render_neighbors, render_novel_view, BlendMode, IrregularParams};
use mpi_fusion::geometry::{Camera, Intrinsics, Pose};
use mpi_fusion::image::Image;
use mpi_fusion::mpi::{render_mpi, render_mpi_with_stats, Mpi, Premultiplied};
use mpi_fusion::sampling::{disparity_bound, mpi_interval, nyquist_interval, SamplingConfig};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{flat_layer, grid_setup, max_abs_diff, nearby_target, oracle_render, random_mpi};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(budget: Duration, o: Outcome, took: Duration) -> Outcome {
    let within = took <= budget;
    outcome(
        o.pass && within,
        format!("{}; {:.3?} of {:?} budget", o.detail, took, budget),
    )
}

fn run(name: &str, budget: Duration, f: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let o = timed(budget, o, start.elapsed());
    println!(
        "{} {name}: {}",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    o.pass
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// -- planner ---------------------------------------------------------------

fn planner_intro() -> Outcome {
    let cfg =
        SamplingConfig::from_fov(1, 1000.0, 64f64.to_radians(), 4e-3, 0.5, f64::INFINITY).unwrap();
    let start = Instant::now();
    let du = nyquist_interval(&cfg).unwrap();
    let took = start.elapsed();
    let density = 1.0 / (du * du);
    let rel = (density - 2.5e6).abs() / 2.5e6;
    timed(
        Duration::from_millis(1),
        outcome(
            rel <= 0.05,
            format!(
                "density {density:.4e} views/m^2, {:.2}% from 2.5e6",
                rel * 100.0
            ),
        ),
        took,
    )
}

fn factor_d_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut identity = true;
    for _ in 0..100 {
        let planes = rng.gen_range(1..=256);
        let width = rng.gen_range(64..4096) as f64;
        let fov = rng.gen_range(20f64..120.0).to_radians();
        let focal_m = rng.gen_range(1e-3..0.1);
        let z_min = rng.gen_range(0.1..10.0);
        let z_max = if rng.gen_bool(0.2) {
            f64::INFINITY
        } else {
            z_min * rng.gen_range(1.01..100.0)
        };
        let mut cfg = SamplingConfig::from_fov(planes, width, fov, focal_m, z_min, z_max).unwrap();
        if rng.gen_bool(0.5) {
            cfg = cfg.with_band_limit(rng.gen_range(1.0..1e5)).unwrap();
        }
        let (mpi, nyq) = (mpi_interval(&cfg).unwrap(), nyquist_interval(&cfg).unwrap());
        identity &= mpi == planes as f64 * nyq;
        // the quotient itself may round by one ulp
        worst = worst.max((mpi / nyq - planes as f64).abs() / planes as f64);
    }
    let bound = disparity_bound(1, 640.0);
    outcome(
        identity && worst <= f64::EPSILON && bound == 1.0,
        format!(
            "mpi_interval == D * nyquist_interval: {identity}; max relative ratio error {worst:e}; disparity_bound(1, 640) = {bound}"
        ),
    )
}

// -- renderer ---------------------------------------------------------------

fn renderer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let mpi = random_mpi(&mut rng, 64, 48, 8);
        let target = nearby_target(&mut rng, &mpi);
        let got = render_mpi(&mpi, &target);
        let (rgb, alpha) = oracle_render(&mpi, &target);
        worst = worst
            .max(max_abs_diff(&got.rgb, &rgb))
            .max(max_abs_diff(&got.alpha, &alpha));
    }
    outcome(
        worst <= 1e-5,
        format!("max per-channel difference {worst:.3e} over 20 MPIs"),
    )
}

fn over_associativity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..12);
        let stack: Vec<Premultiplied> = (0..n)
            .map(|_| {
                let a: f64 = rng.gen();
                Premultiplied::from_straight(&[rng.gen(), rng.gen(), rng.gen(), a])
            })
            .collect();
        // stack[0] is nearest
        let left = stack.iter().skip(1).fold(stack[0], |acc, &p| acc.over(p));
        let right = stack
            .iter()
            .rev()
            .skip(1)
            .fold(stack[n - 1], |acc, &p| p.over(acc));
        let split = rng.gen_range(1..n);
        let front = stack[..split]
            .iter()
            .rev()
            .skip(1)
            .fold(stack[split - 1], |acc, &p| p.over(acc));
        let back = stack[split..]
            .iter()
            .skip(1)
            .fold(stack[split], |acc, &p| acc.over(p));
        let mixed = front.over(back);
        for other in [right, mixed] {
            worst = worst.max((left.alpha - other.alpha).abs());
            for k in 0..3 {
                worst = worst.max((left.rgb[k] - other.rgb[k]).abs());
            }
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max grouping difference {worst:.3e} over 1000 stacks"),
    )
}

// -- view synthesis experiments ---------------------------------------------

const TREND_SIZE: (usize, usize) = (128, 96);

fn plane_count_trend() -> Outcome {
    let intr = Intrinsics::from_fov(60f64.to_radians(), TREND_SIZE.0, TREND_SIZE.1).unwrap();
    // hard-edged patches, layers kept inside every view's frustum
    let params = SynthParams {
        half_size: (0.3, 0.4),
        max_offset: 0.1,
        min_wavelength_px: 4.0,
        texture: TextureStyle::Patches,
        ..SynthParams::default()
    };
    let (cams, targets) = grid_setup(intr, 3, 32.0, params.z_min, 16, 5);
    let mut framed = cams.clone();
    framed.extend_from_slice(&targets);
    let scene = synthesize_scene(&params, &framed).unwrap();
    let truth: Vec<Image<f64>> = targets
        .iter()
        .map(|t| render_layered_scene(&scene, t))
        .collect();
    let score = |planes: usize| -> f64 {
        let mpis: Vec<Mpi> = cams
            .iter()
            .map(|c| build_mpi_groundtruth(&scene, c, planes, params.z_min, params.z_max).unwrap())
            .collect();
        let psnrs: Vec<f64> = targets
            .iter()
            .zip(&truth)
            .map(|(t, gt)| {
                psnr(
                    &render_novel_view(&mpis, t, &BlendMode::GridBilinear)
                        .unwrap()
                        .rgb,
                    gt,
                )
                .unwrap()
            })
            .collect();
        mean(&psnrs)
    };
    let (p8, p32, p64) = (score(8), score(32), score(64));
    outcome(
        p32 >= p8 + 3.0 && p64 - p32 <= 1.0,
        format!("mean PSNR D=8 {p8:.2} dB, D=32 {p32:.2} dB, D=64 {p64:.2} dB (need +3 dB, then <= 1 dB)"),
    )
}

/// Two MPIs looking past an opaque card at a textured backdrop. Every plane
/// shifts by a whole number of pixels between the MPIs and the target, so
/// resampling is exact and the only error left is what fusion introduces.
fn occluder_scene() -> (LayeredScene, Vec<Mpi>, Camera) {
    let (w, h) = (64, 48);
    let focal = 64.0;
    let intr = Intrinsics::centered(focal, w, h).unwrap();
    let (z_min, z_max) = (1.0, 4.0);
    let baseline = 16.0 * z_min / focal;
    let cam = |x: f64| Camera::new(intr, Pose::from_translation(Vector3::new(x, 0.0, 0.0)));
    // card edges on pixel boundaries of the first MPI
    let edge = |px: f64, c: f64| (px - c) * z_min / focal;
    let card = flat_layer(
        z_min,
        [0.9, 0.2, 0.1, 1.0],
        [
            edge(24.5, intr.principal_x),
            edge(-100.0, intr.principal_y),
            edge(38.5, intr.principal_x),
            edge(100.0, intr.principal_y),
        ],
    );
    let texture = Image::from_fn(256, 128, 4, |x, y, p| {
        p[0] = 0.5 + 0.3 * (x as f32 * 0.11).sin();
        p[1] = 0.5 + 0.3 * (y as f32 * 0.07).cos();
        p[2] = 0.4;
        p[3] = 1.0;
    });
    let backdrop = SceneLayer::new(z_max, texture, [-4.0, -3.0, 4.0, 3.0]).unwrap();
    let scene = LayeredScene::new(vec![card, backdrop], [0.0; 3]).unwrap();
    let mpis = [0.0, baseline]
        .iter()
        .map(|&x| build_mpi_visible(&scene, &cam(x), 4, z_min, z_max).unwrap())
        .collect();
    (scene, mpis, cam(baseline / 2.0))
}

fn alpha_modulated_ablation() -> Outcome {
    let (scene, mpis, target) = occluder_scene();
    let truth = render_layered_scene(&scene, &target);
    let mode = BlendMode::IrregularExponential(IrregularParams::new(64.0, 4, 1.0));
    let (_, renders, _) = render_neighbors(&mpis, &target, &mode).unwrap();
    let full = ablation_render(&mpis, &target, Ablation::Full, &mode).unwrap();
    let avg = ablation_render(&mpis, &target, Ablation::Average, &mode).unwrap();
    let (mut se_full, mut se_avg, mut holes) = (0.0, 0.0, 0usize);
    let mut filled_err = 0.0f64;
    let mut filled = 0usize;
    for y in 0..truth.height() {
        for x in 0..truth.width() {
            let a: Vec<f64> = renders.iter().map(|r| r.alpha.get(x, y, 0)).collect();
            if a.iter().all(|&v| v >= 1.0 - 1e-9) {
                continue;
            }
            holes += 1;
            for k in 0..3 {
                se_full += (full.get(x, y, k) - truth.get(x, y, k)).powi(2);
                se_avg += (avg.get(x, y, k) - truth.get(x, y, k)).powi(2);
            }
            if a.iter().any(|&v| v >= 1.0 - 1e-9) {
                filled += 1;
                for k in 0..3 {
                    filled_err = filled_err.max((full.get(x, y, k) - truth.get(x, y, k)).abs());
                }
            }
        }
    }
    let (mse_full, mse_avg) = (se_full / (3 * holes) as f64, se_avg / (3 * holes) as f64);
    outcome(
        holes > 0 && filled > 0 && mse_full < mse_avg && filled_err <= 1e-3,
        format!(
            "{holes} hole pixels: MSE fused {mse_full:.3e} vs average {mse_avg:.3e}; max fused error {filled_err:.3e} on {filled} pixels the other MPI covers"
        ),
    )
}

const LFI_SIZE: (usize, usize) = (96, 72);

fn lfi_degradation() -> Outcome {
    let intr = Intrinsics::from_fov(60f64.to_radians(), LFI_SIZE.0, LFI_SIZE.1).unwrap();
    let params = SynthParams {
        layers: 2,
        seed: 3,
        ..SynthParams::default()
    };
    let dmaxes = [1.0, 4.0, 16.0, 32.0];
    let setups: Vec<(Vec<Camera>, Vec<Camera>)> = dmaxes
        .iter()
        .map(|&d| grid_setup(intr, 3, d, params.z_min, 8, 9))
        .collect();
    // the scene is framed once, for the widest grid, and kept fixed
    let mut framed = setups[3].0.clone();
    framed.extend_from_slice(&setups[3].1);
    let scene = synthesize_scene(&params, &framed).unwrap();
    let disp = mean_scene_disparity(params.z_min, params.z_max);
    let mode = BlendMode::GridBilinear;
    let mut lfi = Vec::new();
    for (cams, targets) in &setups {
        let sources: Vec<PosedImage> = cams
            .iter()
            .map(|c| PosedImage::new(render_layered_scene(&scene, c), *c).unwrap())
            .collect();
        let p: Vec<f64> = targets
            .iter()
            .map(|t| {
                psnr(
                    &lfi_render(&sources, t, disp, &mode).unwrap(),
                    &render_layered_scene(&scene, t),
                )
                .unwrap()
            })
            .collect();
        lfi.push(mean(&p));
    }
    let (cams, targets) = &setups[3];
    let mpis: Vec<Mpi> = cams
        .iter()
        .map(|c| build_mpi_groundtruth(&scene, c, 32, params.z_min, params.z_max).unwrap())
        .collect();
    let full = mean(
        &targets
            .iter()
            .map(|t| {
                psnr(
                    &render_novel_view(&mpis, t, &mode).unwrap().rgb,
                    &render_layered_scene(&scene, t),
                )
                .unwrap()
            })
            .collect::<Vec<_>>(),
    );
    let monotone = lfi.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        monotone && full > lfi[3],
        format!(
            "LFI PSNR at d_max 1/4/16/32: {:.2}/{:.2}/{:.2}/{:.2} dB; full pipeline at 32: {full:.2} dB",
            lfi[0], lfi[1], lfi[2], lfi[3]
        ),
    )
}

// -- storage and complexity -------------------------------------------------

fn complexity_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (w, h, d) = (40, 40, 6);
    let mpi = random_mpi(&mut rng, w, h, d);
    let target = nearby_target(&mut rng, &mpi);
    let (_, stats) = render_mpi_with_stats(&mpi, &target);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mpib");
    export_mpi(&mpi, &path).unwrap();
    let size = std::fs::metadata(&path).unwrap().len() as usize;
    let expect_size = header_len(d) + 16 * w * h * d;
    outcome(
        stats.plane_pixels == (w * w * d) as u64
            && stats.skipped_planes == 0
            && size == expect_size
            && size == bundle_len(w, h, d),
        format!(
            "plane-pixels {} (W^2 D = {}); bundle {size} bytes (header + 16 W H D = {expect_size})",
            stats.plane_pixels,
            w * w * d
        ),
    )
}

fn bundle_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    for i in 0..5 {
        let mpi = random_mpi(&mut rng, 17 + i, 9 + 2 * i, 1 + i);
        let path = dir.path().join(format!("{i}.mpib"));
        export_mpi(&mpi, &path).unwrap();
        let back = import_mpi(&path).unwrap();
        identical &= back == mpi && encode_mpi(&back) == std::fs::read(&path).unwrap();
    }
    let golden = std::fs::read(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/golden_2x2x1.mpib"
    ))
    .unwrap();
    let encoded = encode_mpi(&common::golden_mpi());
    let decoded = decode_mpi(&golden)
        .map(|m| m == common::golden_mpi())
        .unwrap_or(false);
    outcome(
        identical && golden == encoded && decoded,
        format!(
            "5 random bundles bit-identical: {identical}; golden {} bytes byte-exact: {}",
            golden.len(),
            golden == encoded && decoded
        ),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "planner-intro-density",
            Duration::from_millis(100),
            planner_intro,
        ),
        ("factor-d-law", Duration::from_secs(1), factor_d_law),
        (
            "renderer-oracle-equivalence",
            Duration::from_secs(10),
            renderer_oracle,
        ),
        (
            "over-associativity",
            Duration::from_secs(5),
            over_associativity,
        ),
        (
            "plane-count-trend",
            Duration::from_secs(120),
            plane_count_trend,
        ),
        (
            "alpha-modulated-ablation",
            Duration::from_secs(30),
            alpha_modulated_ablation,
        ),
        ("lfi-degradation", Duration::from_secs(60), lfi_degradation),
        (
            "complexity-exactness",
            Duration::from_secs(10),
            complexity_exactness,
        ),
        (
            "bundle-round-trip",
            Duration::from_secs(10),
            bundle_round_trip,
        ),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, budget, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        if !run(name, budget, f) {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v != "0") {
        std::process::exit(1);
    }
}
