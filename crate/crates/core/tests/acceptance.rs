//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use ipsim_core::analog_compute::calibrated_tau_leak;
use ipsim_core::io::{encode_features, FeatureFormat};
use ipsim_core::perf_model::ReadoutOverlap;
use ipsim_core::sensor_frontend::{BLUE, GREEN, RED};
use ipsim_core::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn one_patch_array(pixels: &[f64], w: usize, h: usize) -> AnalogPixelArray {
    let mut arr = AnalogPixelArray::filled(w, h, 1.0, 0.0);
    arr.voltages.copy_from_slice(pixels);
    arr
}

/// `|b| + sum|W * P| / N^2`: the magnitude that rounding error scales with.
fn magnitude(raw: &[f64], bias: &[f64], pixels: &[f64]) -> Vec<f64> {
    let n = pixels.len();
    raw.chunks_exact(n)
        .zip(bias)
        .map(|(row, b)| b.abs() + row.iter().zip(pixels).map(|(w, p)| (w * p).abs()).sum::<f64>() / n as f64)
        .collect()
}

/// `b + sum(W * P) / N^2` with compensated summation on the raw weights.
fn dense_oracle(raw: &[f64], bias: &[f64], pixels: &[f64]) -> Vec<f64> {
    let n = pixels.len();
    raw.chunks_exact(n)
        .zip(bias)
        .map(|(row, b)| {
            let (mut s, mut c) = (0.0f64, 0.0f64);
            for (w, p) in row.iter().zip(pixels) {
                let y = w * p - c;
                let t = s + y;
                c = (t - s) - y;
                s = t;
            }
            b + s / n as f64
        })
        .collect()
}

fn ideal_pipeline(
    pixels: &[f64],
    pw: usize,
    ph: usize,
    bank: &WeightBank,
    profile: &HardwareProfile,
    fidelity: Fidelity,
) -> Vec<f64> {
    let arr = one_patch_array(pixels, pw, ph);
    let tiling = build_tiling(pw, ph, pw, ph, 0, 0).unwrap();
    let mask = SelectionMask::all(&tiling);
    let analog = run_frame(&arr, &tiling, bank, &mask, profile, fidelity, 0).unwrap();
    let digital =
        assemble_features(&analog, &AdcConfig::default(), bank, profile, fidelity).unwrap();
    digital.patches[0].features.clone()
}

fn c1_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let profile = HardwareProfile::default();
    let mut busy = 0.0;
    let mut worst = 0.0f64;
    let instances = 120;
    for _ in 0..instances {
        let side = patch_engine::PATCH_SIZES[rng.gen_range(0..4)];
        let (pw, ph) = (side, patch_engine::PATCH_SIZES[rng.gen_range(0..4)]);
        let n = pw * ph;
        let m = rng.gen_range(1..=768);
        let amp = 10f64.powf(rng.gen_range(-2.0..2.0));
        let raw: Vec<f64> = (0..m * n).map(|_| amp * rng.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pixels: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let bank = WeightBank::new(m, n, raw.clone(), bias.clone()).unwrap();
        let start = Instant::now();
        let got = ideal_pipeline(&pixels, pw, ph, &bank, &profile, Fidelity::Ideal);
        let want = dense_oracle(&raw, &bias, &pixels);
        busy += start.elapsed().as_secs_f64();
        let mag = magnitude(&raw, &bias, &pixels);
        for ((g, w), s) in got.iter().zip(&want).zip(&mag) {
            worst = worst.max((g - w).abs() / s);
        }
    }
    let secs = busy;
    check(
        worst <= 1e-12 && secs < 10.0,
        format!("{instances} instances, max rel err {worst:.3e} (tol 1e-12), {secs:.2} s (limit 10 s)"),
    )
}

fn c2_charge_share() -> Outcome {
    let profile = HardwareProfile::default();
    let caps: Vec<CapCharge> = (0..1536)
        .map(|i| CapCharge {
            voltage: if i < 768 { 1.0 } else { 0.0 },
        })
        .collect();
    let opamp = charge_share_sum(&caps, &SumMode::opamp(), &profile).unwrap();
    let passive = charge_share_sum(&caps, &SumMode::passive(10e-6), &profile).unwrap();
    let tau = profile.tau_leak;
    let rounded = HardwareProfile {
        tau_leak: 94.9e-6,
        ..profile.clone()
    };
    let passive_rounded = charge_share_sum(&caps, &SumMode::passive(10e-6), &rounded).unwrap();
    check(
        (opamp - 0.5).abs() <= 1e-12
            && (passive - 0.45).abs() <= 1e-6
            && tau == calibrated_tau_leak()
            && (tau - 94.9e-6).abs() < 0.05e-6,
        format!(
            "opamp {opamp:.12} V (want 0.5 +-1e-12), passive@10us {passive:.9} V (want 0.45 +-1e-6) with tau {:.4} us; tau rounded to 94.9 us gives {passive_rounded:.9} V",
            tau * 1e6
        ),
    )
}

fn c3_analog_enob() -> Outcome {
    let mut rng = StdRng::seed_from_u64(3);
    let profile = HardwareProfile::default();
    let adc = AdcConfig::default();
    let (pw, ph, m) = (8, 8, 16);
    let n = pw * ph;
    let patches = 1200;
    let (mut sq, mut count, mut scale) = (0.0, 0usize, 1.0);
    for i in 0..patches {
        let raw: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let pixels: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let bank = WeightBank::new(m, n, raw.clone(), bias.clone()).unwrap();
        scale = bank.scale();
        let profile = HardwareProfile {
            noise_seed: i as u64,
            ..profile.clone()
        };
        let got = ideal_pipeline(&pixels, pw, ph, &bank, &profile, Fidelity::Analog);
        for (g, w) in got.iter().zip(dense_oracle(&raw, &bias, &pixels)) {
            sq += (g - w) * (g - w);
            count += 1;
        }
    }
    let rms = (sq / count as f64).sqrt();
    let full_scale = (adc.v_hi - adc.v_lo) * scale;
    let enob = (full_scale / (rms * 12f64.sqrt())).log2();
    check(
        enob >= 6.0,
        format!("{patches} patches of 8x8, M={m}: rms err {rms:.3e}, full scale {full_scale}, ENOB {enob:.3} (min 6.0)"),
    )
}

fn measured_attenuation(cutoff: f64) -> f64 {
    let fc = 0.5 * cutoff;
    let (w, h) = (256, 8);
    let img = RgbImage::from_fn(w, h, |x, _| {
        let v = 0.5 + 0.25 * (std::f64::consts::TAU * fc * x as f64).cos();
        [v, v, v]
    })
    .unwrap();
    let out = gaussian_antialias(&img, cutoff).unwrap();
    let (mut re, mut im) = (0.0, 0.0);
    let window = 64..192;
    let len = window.len() as f64;
    for x in window {
        let s = out.pixel(x, h / 2)[1] - 0.5;
        let ph = std::f64::consts::TAU * fc * x as f64;
        re += s * ph.cos();
        im -= s * ph.sin();
    }
    2.0 * (re * re + im * im).sqrt() / len / 0.25
}

fn c4_antialias() -> Outcome {
    let a25 = measured_attenuation(0.25);
    let a50 = measured_attenuation(0.5);
    let target = std::f64::consts::FRAC_1_SQRT_2;
    check(
        (a25 - target).abs() <= 0.01 && (a50 - target).abs() <= 0.01,
        format!("response at design frequency: cutoff 0.25 -> {a25:.4}, cutoff 0.5 -> {a50:.4} (want 0.707 +-0.01)"),
    )
}

/// Sampled channel of each 2x2 cell position, listed independently of the
/// crate's own pattern table.
fn cell(pattern: BayerPattern) -> [[usize; 2]; 2] {
    match pattern {
        BayerPattern::Rggb => [[RED, GREEN], [GREEN, BLUE]],
        BayerPattern::Bggr => [[BLUE, GREEN], [GREEN, RED]],
        BayerPattern::Grbg => [[GREEN, RED], [BLUE, GREEN]],
        BayerPattern::Gbrg => [[GREEN, BLUE], [RED, GREEN]],
        BayerPattern::Mono => [[GREEN, GREEN], [GREEN, GREEN]],
    }
}

fn c5_strike_columns() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let patterns = [
        BayerPattern::Rggb,
        BayerPattern::Bggr,
        BayerPattern::Grbg,
        BayerPattern::Gbrg,
    ];
    let pairs = 120;
    let mut worst = 0.0f64;
    for i in 0..pairs {
        let pattern = patterns[i % 4];
        let pw = patch_engine::PATCH_SIZES[rng.gen_range(0..4)];
        let ph = patch_engine::PATCH_SIZES[rng.gen_range(0..4)];
        let m = rng.gen_range(1..=64);
        let n = pw * ph;
        let a: Vec<f64> = (0..m * n * 3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let img = RgbImage::from_fn(pw, ph, |_, _| {
            [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]
        })
        .unwrap();
        let a_prime = strike_columns(&a, m, pw, ph, pattern).unwrap();
        let mosaic = mosaic_bayer(&img, pattern).unwrap();
        let masked: Vec<f64> = (0..n)
            .flat_map(|p| {
                let (x, y) = (p % pw, p / pw);
                let keep = cell(pattern)[y % 2][x % 2];
                let px = img.pixel(x, y);
                (0..3).map(move |c| if c == keep { px[c] } else { 0.0 })
            })
            .collect();
        for v in 0..m {
            let lhs: f64 = a_prime[v * n..][..n].iter().zip(&mosaic.data).map(|(w, x)| w * x).sum();
            let rhs: f64 = a[v * n * 3..][..n * 3].iter().zip(&masked).map(|(w, x)| w * x).sum();
            let denom: f64 = a[v * n * 3..][..n * 3]
                .iter()
                .zip(&masked)
                .map(|(w, x)| (w * x).abs())
                .sum();
            worst = worst.max((lhs - rhs).abs() / denom.max(1.0));
        }
    }
    check(worst <= 1e-12, format!("{pairs} (A, patch) pairs, max err {worst:.3e} (tol 1e-12)"))
}

fn c6_throughput() -> Outcome {
    let hd = TimingConfig::default();
    let tp = throughput(&hd).unwrap();
    let small = TimingConfig {
        patch_w: 8,
        patch_h: 8,
        m: 192,
        ..TimingConfig::default()
    };
    let tp_small = throughput(&small).unwrap();
    let mut scaling_ok = true;
    for overlap in [ReadoutOverlap::Pipelined, ReadoutOverlap::Sequential] {
        for c in [1, 2, 4] {
            let at = |c| {
                frame_time(&TimingConfig {
                    c,
                    overlap,
                    ..TimingConfig::default()
                })
                .unwrap()
                .compute_s
            };
            scaling_ok &= at(c) == 2.0 * at(2 * c);
        }
    }
    check(
        tp.frame_rate_hz >= 90.0 && tp.mpix_per_s >= 100.0 && tp_small.frame_rate_hz > 30.0 && scaling_ok,
        format!(
            "1080p C=2 M=400 32x32: {:.2} Hz, {:.2} Mpix/s; 8x8 M=192: {:.1} Hz; C halving/doubling exact: {scaling_ok}",
            tp.frame_rate_hz, tp.mpix_per_s, tp_small.frame_rate_hz
        ),
    )
}

fn c7_power() -> Outcome {
    let t = TimingConfig::default();
    let p = power_estimate(&t, &PowerConfig::default()).unwrap();
    let mpix = t.sensor_pixels() as f64 / 1e6;
    let per_mpix = p.total / mpix;
    check(
        p.total <= 60.0 && p.dominant() == "adc" && per_mpix <= 30.0,
        format!(
            "{mpix:.3} Mpix @ 30 Hz, 25% active: total {:.2} mW (max 60), largest {} ({:.2} mW), {per_mpix:.2} mW/Mpix (max 30)",
            p.total,
            p.dominant(),
            p.adc
        ),
    )
}

fn c8_area() -> Outcome {
    let a = area_estimate(&AreaTable::default()).unwrap();
    let want = [0.13, 0.40, 0.42, 0.03, 0.02];
    let occ_ok = a.occupancy.len() == want.len()
        && a.occupancy.iter().zip(want).all(|((_, o), w)| (o - w).abs() <= 0.01);
    let occ: Vec<String> = a.occupancy.iter().map(|(_, o)| format!("{:.1}", o * 100.0)).collect();
    check(
        (a.total_um2 - 485.0).abs() < 1e-9 && (a.pitch_um - 22.0).abs() <= 0.1 && occ_ok,
        format!(
            "total {} um^2 (want 485), pitch {:.3} um (want 22.0 +-0.1), occupancy {}% (want 13/40/42/3/2 +-1)",
            a.total_um2,
            a.pitch_um,
            occ.join("/")
        ),
    )
}

fn c9_reduction() -> Outcome {
    let r = data_reduction(32, 32, 400, 0.25).unwrap();
    check(
        (r.bayer - 10.24).abs() < 1e-12 && (r.rgb - 30.72).abs() < 1e-12,
        format!("32x32, M=400, 25%: {}x vs Bayer (want 10.24), {}x vs RGB (want 30.72)", r.bayer, r.rgb),
    )
}

fn run_in_pool(threads: usize, f: impl FnOnce() -> Vec<u8> + Send) -> Vec<u8> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn c10_determinism() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    let (w, h) = (128, 96);
    let img = RgbImage::from_fn(w, h, |_, _| {
        [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]
    })
    .unwrap();
    let (m, n) = (24, 16 * 16);
    let raw: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let bank = WeightBank::new(m, n, raw, vec![0.1; m]).unwrap();
    let mut cfg = RunConfig {
        antialias_cutoff: Some(0.5),
        selection_fraction: 0.5,
        ..Default::default()
    };
    cfg.tiling.patch_w = 16;
    cfg.tiling.patch_h = 16;
    cfg.hardware.noise_seed = 42;
    cfg.exposure.read_noise_v = 1e-3;
    let run = |threads| {
        run_in_pool(threads, || {
            let f = pipeline::simulate_frame(&img, &bank, None, &cfg, 7).unwrap();
            encode_features(&f, FeatureFormat::Bin, false)
        })
    };
    let serial = run(1);
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let parallel = run(threads);
    let again = run(threads);
    check(
        serial == parallel && parallel == again,
        format!(
            "{} feature bytes; 1 thread vs {threads} threads identical: {}",
            serial.len(),
            serial == parallel && parallel == again
        ),
    )
}

fn c11_connected_patches() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let mut worst = [0.0f64; 2];
    for trial in 0..50 {
        let m = rng.gen_range(1..=64);
        let raw: Vec<f64> = (0..m * 256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pixels: Vec<f64> = (0..256).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let bank = WeightBank::new(m, 256, raw, bias).unwrap();
        let quads: Vec<(Vec<f64>, WeightBank)> = [(0, 0), (8, 0), (0, 8), (8, 8)]
            .iter()
            .map(|&(x0, y0)| {
                let px: Vec<f64> = (y0..y0 + 8)
                    .flat_map(|y| pixels[y * 16 + x0..][..8].to_vec())
                    .collect();
                (px, bank.sub_block(16, x0, y0, 8, 8).unwrap())
            })
            .collect();
        let blocks: Vec<(&[f64], &WeightBank)> = quads.iter().map(|(p, b)| (p.as_slice(), b)).collect();
        let profile = HardwareProfile {
            noise_seed: trial,
            ..HardwareProfile::default()
        };
        let key = NoiseKey::new(trial, Domain::Analog).patch(3);
        for (slot, fidelity) in [Fidelity::Ideal, Fidelity::Analog].into_iter().enumerate() {
            let direct = project_patch(&pixels, &bank, &profile, fidelity, key).unwrap();
            let joined = project_connected(&blocks, &profile, fidelity, key).unwrap();
            for (d, j) in direct.iter().zip(&joined) {
                worst[slot] = worst[slot].max((d - j).abs());
            }
        }
    }
    check(
        worst[0] <= 1e-12,
        format!(
            "16x16 direct vs four connected 8x8: IDEAL max diff {:.3e} (tol 1e-12); ANALOG {:.3e}",
            worst[0], worst[1]
        ),
    )
}

fn c12_qth() -> Outcome {
    let count = 1_000_000;
    let (lo, hi) = (-30.0f64, 30.0f64);
    let bound = std::f64::consts::SQRT_2 - 1.0;
    let mut worst = 0.0f64;
    let mut bad_shape = 0;
    for i in 0..count {
        let mag = 2f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64);
        for w in [mag, -mag] {
            let q = qth_quantize(w);
            let exact_pow2 = q != 0.0 && q.abs().to_bits() & ((1u64 << 52) - 1) == 0;
            if !exact_pow2 || q.signum() != w.signum() {
                bad_shape += 1;
            }
            worst = worst.max((q - w).abs() / w.abs());
        }
    }
    let zero_ok = qth_quantize(0.0) == 0.0;
    check(
        bad_shape == 0 && zero_ok && worst <= bound + 1e-12,
        format!(
            "{count} log-spaced magnitudes x 2 signs: non-power-of-two outputs {bad_shape}, max rel err {worst:.6} (bound {bound:.6}), zero -> zero: {zero_ok}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("ideal pipeline equals dense oracle", c1_equivalence),
        ("charge-share benchmark", c2_charge_share),
        ("analog fidelity ENOB", c3_analog_enob),
        ("antialias -3 dB response", c4_antialias),
        ("column strike-out correctness", c5_strike_columns),
        ("throughput operating point", c6_throughput),
        ("power operating point", c7_power),
        ("pixel area and pitch", c8_area),
        ("output data reduction", c9_reduction),
        ("thread-count determinism", c10_determinism),
        ("connected patch invariance", c11_connected_patches),
        ("power-of-two attention quantizer", c12_qth),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
