//! Browser bindings for the demo page in `www/`.
//!
//! Every export takes plain numbers or strings and returns a JSON string, so
//! the page needs no glue beyond `JSON.parse`. The `*_json` functions hold
//! the logic and are what the native tests exercise.

use ipsim_core::pipeline::{oracle_frame, simulate_frame};
use ipsim_core::sensor_frontend::{antialias_sigma, gaussian_kernel, kernel_response};
use ipsim_core::synthetic::{synthesize, SyntheticPattern};
use ipsim_core::{
    perf_report, Domain, Fidelity, NoiseKey, PowerConfig, RunConfig, TimingConfig, WeightBank,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Res<T> = std::result::Result<T, String>;

fn to_js(r: Res<String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

fn json<T: Serialize>(v: &T) -> Res<String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Curve {
    sigma: f64,
    design_freq: f64,
    freqs: Vec<f64>,
    response: Vec<f64>,
}

/// Magnitude response of the antialias kernel from DC to Nyquist.
pub fn antialias_curve_json(cutoff: f64, points: usize) -> Res<String> {
    let sigma = antialias_sigma(cutoff).map_err(|e| e.to_string())?;
    let k = gaussian_kernel(sigma);
    let n = points.clamp(2, 4096);
    let freqs: Vec<f64> = (0..n).map(|i| 0.5 * i as f64 / (n - 1) as f64).collect();
    let response = freqs.iter().map(|&f| kernel_response(&k, f)).collect();
    json(&Curve {
        sigma,
        design_freq: 0.5 * cutoff,
        freqs,
        response,
    })
}

#[derive(Serialize)]
struct Projection {
    cols: usize,
    rows: usize,
    m: usize,
    /// Feature 0 of every patch, row-major over the patch grid.
    analog: Vec<f64>,
    exact: Vec<f64>,
    max_abs_err: f64,
    rms_err: f64,
    enob: f64,
}

/// Projects a synthetic image with a random bank through the noisy pipeline
/// and the exact reference, every patch selected.
pub fn project_json(pattern: &str, size: usize, patch: usize, m: usize, seed: u64) -> Res<String> {
    if !(2..=512).contains(&size) || !size.is_multiple_of(2) {
        return Err("size must be even and in [2, 512]".into());
    }
    if patch == 0 || patch > size || !(1..=64).contains(&m) {
        return Err("need 1 <= patch <= size and 1 <= m <= 64".into());
    }
    let pattern: SyntheticPattern = pattern.parse().map_err(|e: ipsim_core::Error| e.to_string())?;
    let img = synthesize(pattern, size, size, seed, true).map_err(|e| e.to_string())?;

    let n = patch * patch;
    let key = NoiseKey::new(seed, Domain::Synthetic).vector(7);
    let raw = (0..m * n)
        .map(|i| 2.0 * key.pixel(i as u32).uniform(0) - 1.0)
        .collect();
    let bank = WeightBank::new(m, n, raw, vec![0.0; m]).map_err(|e| e.to_string())?;

    let mut cfg = RunConfig::default();
    cfg.tiling.patch_w = patch;
    cfg.tiling.patch_h = patch;
    cfg.selection_fraction = 1.0;
    cfg.hardware.noise_seed = seed;
    cfg.fidelity = Fidelity::Analog;
    let analog = simulate_frame(&img, &bank, None, &cfg, 0).map_err(|e| e.to_string())?;
    let exact = oracle_frame(&img, &bank, None, &cfg, 0).map_err(|e| e.to_string())?;

    let (mut max, mut sq, mut count) = (0.0f64, 0.0, 0usize);
    for (a, b) in analog.values().zip(exact.values()) {
        let d = (a - b).abs();
        max = max.max(d);
        sq += d * d;
        count += 1;
    }
    let rms = (sq / count.max(1) as f64).sqrt();
    let first = |f: &ipsim_core::DigitalFeatureFrame| f.patches.iter().map(|p| p.features[0]).collect();
    json(&Projection {
        cols: size / patch,
        rows: size / patch,
        m,
        analog: first(&analog),
        exact: first(&exact),
        max_abs_err: max,
        rms_err: rms,
        // Full scale 2: features span [-1, 1] with unit weight scale.
        enob: (2.0 / (rms * 12f64.sqrt())).log2(),
    })
}

#[derive(Serialize)]
struct SweepRow {
    m: usize,
    frame_rate_hz: f64,
    mpix_per_s: f64,
    power_mw: f64,
    reduction_bayer: f64,
}

/// Operating points at 1080p for `m` from `m_min` to `m_max` in `steps`
/// geometric steps.
pub fn perf_sweep_json(
    c: u32,
    patch: usize,
    active_fraction: f64,
    m_min: usize,
    m_max: usize,
    steps: usize,
) -> Res<String> {
    if m_min == 0 || m_max < m_min || !(1..=256).contains(&steps) {
        return Err("need 1 <= m_min <= m_max and 1 <= steps <= 256".into());
    }
    let mut rows: Vec<SweepRow> = Vec::new();
    for i in 0..steps {
        let t = if steps == 1 { 0.0 } else { i as f64 / (steps - 1) as f64 };
        let m = (m_min as f64 * (m_max as f64 / m_min as f64).powf(t)).round() as usize;
        if rows.last().is_some_and(|r| r.m == m) {
            continue;
        }
        let timing = TimingConfig {
            c,
            patch_w: patch,
            patch_h: patch,
            m,
            active_fraction,
            ..TimingConfig::default()
        };
        timing.validate().map_err(|e| e.to_string())?;
        let r = perf_report(&timing, &PowerConfig::default(), &Default::default())
            .map_err(|e| e.to_string())?;
        rows.push(SweepRow {
            m,
            frame_rate_hz: r.frame_rate_hz,
            mpix_per_s: r.mpix_per_s,
            power_mw: r.power_mw.total,
            reduction_bayer: r.reduction.bayer,
        });
    }
    json(&rows)
}

#[wasm_bindgen]
pub fn antialias_curve(cutoff: f64, points: usize) -> Result<String, JsError> {
    to_js(antialias_curve_json(cutoff, points))
}

#[wasm_bindgen]
pub fn project(pattern: &str, size: usize, patch: usize, m: usize, seed: u32) -> Result<String, JsError> {
    to_js(project_json(pattern, size, patch, m, seed as u64))
}

#[wasm_bindgen]
pub fn perf_sweep(
    c: u32,
    patch: usize,
    active_fraction: f64,
    m_min: usize,
    m_max: usize,
    steps: usize,
) -> Result<String, JsError> {
    to_js(perf_sweep_json(c, patch, active_fraction, m_min, m_max, steps))
}
