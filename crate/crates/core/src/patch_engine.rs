//! Patch geometry, weight banks, and the per-patch analog linear projection
//!
//! ```text
//! Out_v = V_R + sum_i(W[v,i] * P_i) / N
//! ```
//!
//! where `N` is the number of pixels whose capacitors share charge.
//!
//! Projection results are carried as the signal relative to `V_R`. The
//! absolute amplifier output is `V_R + signal`; keeping the two apart lets the
//! ideal path reproduce the pure-arithmetic reference bit for bit.

use serde::{Deserialize, Serialize};

use crate::analog_compute::{
    charge_share_sum, pwm_multiply, qth_quantize, CapCharge, HardwareProfile,
};
use crate::error::{invalid, Result};
use crate::rng::{Domain, NoiseKey};
use crate::sensor_frontend::{AnalogPixelArray, BayerPattern};

/// Patch edge lengths the in-pixel amplifier wiring can connect.
pub const PATCH_SIZES: [usize; 4] = [8, 16, 24, 32];
/// Granularity of patch origins and per-vector shifts.
pub const ORIGIN_STEP: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchTiling {
    pub sensor_w: usize,
    pub sensor_h: usize,
    pub patch_w: usize,
    pub patch_h: usize,
    pub origin_x: usize,
    pub origin_y: usize,
    /// Row-major patch list.
    pub patches: Vec<PatchRect>,
    /// Per-vector window shift, each component in {-4, 0, +4}. Empty means
    /// every vector reads the patch at its nominal position.
    pub vector_offsets: Vec<(i32, i32)>,
}

/// Non-overlapping grid of `patch_w x patch_h` patches starting at the
/// origin. Partial patches at the right and bottom edges are dropped.
pub fn build_tiling(
    sensor_w: usize,
    sensor_h: usize,
    patch_w: usize,
    patch_h: usize,
    origin_x: usize,
    origin_y: usize,
) -> Result<PatchTiling> {
    if !PATCH_SIZES.contains(&patch_w) || !PATCH_SIZES.contains(&patch_h) {
        return invalid(format!(
            "patch size {patch_w}x{patch_h} not in {PATCH_SIZES:?}"
        ));
    }
    if !origin_x.is_multiple_of(ORIGIN_STEP) || !origin_y.is_multiple_of(ORIGIN_STEP) {
        return invalid(format!(
            "origin ({origin_x}, {origin_y}) must be a multiple of {ORIGIN_STEP}"
        ));
    }
    if sensor_w < patch_w || sensor_h < patch_h {
        return invalid(format!(
            "sensor {sensor_w}x{sensor_h} smaller than patch {patch_w}x{patch_h}"
        ));
    }
    let cols = sensor_w.saturating_sub(origin_x) / patch_w;
    let rows = sensor_h.saturating_sub(origin_y) / patch_h;
    let mut patches = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            patches.push(PatchRect {
                x: origin_x + c * patch_w,
                y: origin_y + r * patch_h,
                w: patch_w,
                h: patch_h,
            });
        }
    }
    Ok(PatchTiling {
        sensor_w,
        sensor_h,
        patch_w,
        patch_h,
        origin_x,
        origin_y,
        patches,
        vector_offsets: Vec::new(),
    })
}

impl PatchTiling {
    pub fn patch_count(&self) -> usize {
        self.patches.len()
    }

    pub fn pixels_per_patch(&self) -> usize {
        self.patch_w * self.patch_h
    }

    /// Attaches per-vector window shifts. Every shifted window of every patch
    /// must stay on the sensor.
    pub fn with_vector_offsets(mut self, offsets: Vec<(i32, i32)>) -> Result<Self> {
        let step = ORIGIN_STEP as i32;
        for &(dx, dy) in &offsets {
            if ![-step, 0, step].contains(&dx) || ![-step, 0, step].contains(&dy) {
                return invalid(format!("vector offset ({dx}, {dy}) not in {{-4, 0, 4}}^2"));
            }
            for p in &self.patches {
                let (x, y) = (p.x as i64 + dx as i64, p.y as i64 + dy as i64);
                if x < 0
                    || y < 0
                    || x as usize + p.w > self.sensor_w
                    || y as usize + p.h > self.sensor_h
                {
                    return invalid(format!(
                        "offset ({dx}, {dy}) moves patch at ({}, {}) off the sensor",
                        p.x, p.y
                    ));
                }
            }
        }
        self.vector_offsets = offsets;
        Ok(self)
    }

    /// Pixels read by `vector` of `patch`, after any offset.
    pub fn window(&self, patch: usize, vector: usize) -> PatchRect {
        let mut r = self.patches[patch];
        if let Some(&(dx, dy)) = self.vector_offsets.get(vector) {
            r.x = (r.x as i64 + dx as i64) as usize;
            r.y = (r.y as i64 + dy as i64) as usize;
        }
        r
    }
}

/// Row-major pixel voltages inside `rect`; fails on any cleared pixel.
pub fn gather_patch(arr: &AnalogPixelArray, rect: PatchRect) -> Result<Vec<f64>> {
    if rect.x + rect.w > arr.width || rect.y + rect.h > arr.height {
        return invalid("patch window extends past the pixel array");
    }
    let mut out = Vec::with_capacity(rect.w * rect.h);
    for y in rect.y..rect.y + rect.h {
        let row = y * arr.width;
        for x in rect.x..rect.x + rect.w {
            if !arr.valid[row + x] {
                return invalid(format!("pixel ({x}, {y}) was cleared by charge dump"));
            }
            out.push(arr.voltages[row + x]);
        }
    }
    Ok(out)
}

/// Saliency bits, one per patch in row-major tiling order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMask {
    bits: Vec<bool>,
}

impl SelectionMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all(tiling: &PatchTiling) -> Self {
        Self::new(vec![true; tiling.patch_count()])
    }

    pub fn none(tiling: &PatchTiling) -> Self {
        Self::new(vec![false; tiling.patch_count()])
    }

    /// Fallback saliency: the `fraction` of patches with the highest pixel
    /// variance, ties going to the lower patch index.
    pub fn top_variance(
        arr: &AnalogPixelArray,
        tiling: &PatchTiling,
        fraction: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return invalid(format!("selection fraction {fraction} outside [0, 1]"));
        }
        let mut scored: Vec<(usize, f64)> = tiling
            .patches
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut vals = Vec::with_capacity(r.w * r.h);
                for y in r.y..r.y + r.h {
                    vals.extend_from_slice(&arr.voltages[y * arr.width + r.x..][..r.w]);
                }
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                (i, vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let keep = (fraction * tiling.patch_count() as f64).round() as usize;
        let mut bits = vec![false; tiling.patch_count()];
        for (i, _) in scored.into_iter().take(keep) {
            bits[i] = true;
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn active_fraction(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.selected().count() as f64 / self.bits.len() as f64
    }

    pub fn check_against(&self, tiling: &PatchTiling) -> Result<()> {
        if self.bits.len() != tiling.patch_count() {
            return invalid(format!(
                "selection mask has {} entries, tiling has {} patches",
                self.bits.len(),
                tiling.patch_count()
            ));
        }
        Ok(())
    }
}

/// Column index of `(pixel, channel)` in an RGB-trained matrix: row-major
/// over pixels, channel-minor.
pub fn rgb_column(pixel: usize, channel: usize) -> usize {
    pixel * 3 + channel
}

/// Drops the columns of an RGB-trained matrix whose channel is not sampled
/// at that pixel under `pattern`.
///
/// `a` is `m x (patch_w * patch_h * 3)` row-major; the result is
/// `m x (patch_w * patch_h)`.
pub fn strike_columns(
    a: &[f64],
    m: usize,
    patch_w: usize,
    patch_h: usize,
    pattern: BayerPattern,
) -> Result<Vec<f64>> {
    let pixels = patch_w * patch_h;
    if m == 0 || a.len() != m * pixels * 3 {
        return invalid(format!(
            "RGB matrix has {} entries, expected {m} x {}",
            a.len(),
            pixels * 3
        ));
    }
    let keep: Vec<usize> = (0..pixels)
        .map(|p| rgb_column(p, pattern.channel_at(p / patch_w, p % patch_w)))
        .collect();
    let mut out = Vec::with_capacity(m * pixels);
    for row in a.chunks_exact(pixels * 3) {
        out.extend(keep.iter().map(|&c| row[c]));
    }
    Ok(out)
}

/// Projection weights shared by every patch.
///
/// Weights are stored normalized so `max|W| <= 1` for the DAC. The
/// normalization `scale` is the smallest power of two at or above the raw
/// `max|W|`, which makes the digital rescale exact.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBank {
    m: usize,
    columns: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    scale: f64,
    source_rgb: Option<Vec<f64>>,
}

fn pow2_ceil(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let e = x.log2().ceil();
    let mut s = 2f64.powi(e as i32);
    // log2 rounding can land one binade off either way.
    if s < x {
        s *= 2.0;
    } else if s / 2.0 >= x {
        s /= 2.0;
    }
    s
}

impl WeightBank {
    /// `raw` is `m x columns` row-major, `bias` has `m` entries.
    pub fn new(m: usize, columns: usize, raw: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if m == 0 || columns == 0 {
            return invalid("weight bank needs at least one vector and one column");
        }
        if raw.len() != m * columns {
            return invalid(format!(
                "weight matrix has {} entries, expected {m} x {columns}",
                raw.len()
            ));
        }
        if bias.len() != m {
            return invalid(format!("{} biases for {m} vectors", bias.len()));
        }
        if raw.iter().chain(&bias).any(|w| !w.is_finite()) {
            return invalid("weights and biases must be finite");
        }
        let scale = pow2_ceil(raw.iter().fold(0.0_f64, |a, w| a.max(w.abs())));
        let weights = raw.into_iter().map(|w| w / scale).collect();
        Ok(Self {
            m,
            columns,
            weights,
            bias,
            scale,
            source_rgb: None,
        })
    }

    /// Builds the sensor-side bank from an RGB-trained matrix.
    pub fn from_rgb(
        m: usize,
        patch_w: usize,
        patch_h: usize,
        source_rgb: Vec<f64>,
        bias: Vec<f64>,
        pattern: BayerPattern,
    ) -> Result<Self> {
        let struck = strike_columns(&source_rgb, m, patch_w, patch_h, pattern)?;
        let mut bank = Self::new(m, patch_w * patch_h, struck, bias)?;
        bank.source_rgb = Some(source_rgb);
        Ok(bank)
    }

    /// Attaches an RGB source matrix without re-deriving the weights; see
    /// [`WeightBank::check_source`].
    pub fn with_source_rgb(mut self, source_rgb: Vec<f64>) -> Result<Self> {
        if source_rgb.len() != self.m * self.columns * 3 {
            return invalid(format!(
                "RGB source has {} entries, expected {} x {}",
                source_rgb.len(),
                self.m,
                self.columns * 3
            ));
        }
        self.source_rgb = Some(source_rgb);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn source_rgb(&self) -> Option<&[f64]> {
        self.source_rgb.as_deref()
    }

    /// Normalized weights of vector `v`.
    pub fn row(&self, v: usize) -> &[f64] {
        &self.weights[v * self.columns..(v + 1) * self.columns]
    }

    /// Un-normalized weights, row-major. Exact: `scale` is a power of two.
    pub fn raw_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w * self.scale).collect()
    }

    /// Checks the stored weights against the stored RGB source.
    pub fn check_source(&self, patch_w: usize, patch_h: usize, pattern: BayerPattern) -> Result<()> {
        let Some(src) = &self.source_rgb else {
            return Ok(());
        };
        let struck = strike_columns(src, self.m, patch_w, patch_h, pattern)?;
        if struck != self.raw_weights() {
            return invalid(format!(
                "weights do not equal the {pattern} column selection of the RGB source"
            ));
        }
        Ok(())
    }

    /// The columns covering a `bw x bh` sub-block at `(x0, y0)` of a
    /// `patch_w`-wide patch, keeping this bank's scale and biases.
    pub fn sub_block(
        &self,
        patch_w: usize,
        x0: usize,
        y0: usize,
        bw: usize,
        bh: usize,
    ) -> Result<Self> {
        let patch_h = self.columns / patch_w;
        if patch_w * patch_h != self.columns || x0 + bw > patch_w || y0 + bh > patch_h {
            return invalid("sub-block does not fit inside the patch");
        }
        let mut weights = Vec::with_capacity(self.m * bw * bh);
        for v in 0..self.m {
            let row = self.row(v);
            for y in y0..y0 + bh {
                weights.extend_from_slice(&row[y * patch_w + x0..][..bw]);
            }
        }
        Ok(Self {
            m: self.m,
            columns: bw * bh,
            weights,
            bias: self.bias.clone(),
            scale: self.scale,
            source_rgb: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    /// Real arithmetic, no quantization, no noise.
    Ideal,
    /// PWM and DAC quantization, summing-node droop, analog noise.
    Analog,
}

/// Signal part (`Out_v - V_R`) of every vector for one patch.
///
/// `noise` carries the frame and patch coordinates; the vector coordinate
/// is filled in here.
pub fn project_patch_signal(
    pixels: &[f64],
    bank: &WeightBank,
    profile: &HardwareProfile,
    fidelity: Fidelity,
    noise: NoiseKey,
) -> Result<Vec<f64>> {
    check_pixels(pixels, bank.columns, profile)?;
    (0..bank.m)
        .map(|v| project_vector(pixels, bank.row(v), profile, fidelity, noise.vector(v as u32)))
        .collect()
}

/// Absolute amplifier outputs `Out_v` for one patch.
pub fn project_patch(
    pixels: &[f64],
    bank: &WeightBank,
    profile: &HardwareProfile,
    fidelity: Fidelity,
    noise: NoiseKey,
) -> Result<Vec<f64>> {
    Ok(project_patch_signal(pixels, bank, profile, fidelity, noise)?
        .into_iter()
        .map(|s| profile.v_r + s)
        .collect())
}

fn check_pixels(pixels: &[f64], columns: usize, profile: &HardwareProfile) -> Result<()> {
    if pixels.len() != columns {
        return invalid(format!(
            "patch has {} pixels, weight bank has {columns} columns",
            pixels.len()
        ));
    }
    if let Some(p) = pixels.iter().find(|p| !(0.0..=profile.v_sat).contains(*p)) {
        return invalid(format!("pixel voltage {p} outside [0, V_sat]"));
    }
    Ok(())
}

fn project_vector(
    pixels: &[f64],
    weights: &[f64],
    profile: &HardwareProfile,
    fidelity: Fidelity,
    key: NoiseKey,
) -> Result<f64> {
    match fidelity {
        Fidelity::Ideal => {
            let dot: f64 = weights.iter().zip(pixels).map(|(w, p)| w * p).sum();
            Ok(dot / pixels.len() as f64)
        }
        Fidelity::Analog => {
            let charges = pixels
                .iter()
                .zip(weights)
                .map(|(&p, &w)| pwm_multiply(p, w, profile, None))
                .collect::<Result<Vec<_>>>()?;
            settle(&charges, profile, key)
        }
    }
}

/// Shared-node voltage after charge sharing, droop and aggregate noise.
fn settle(charges: &[CapCharge], profile: &HardwareProfile, key: NoiseKey) -> Result<f64> {
    let mut v = charge_share_sum(charges, &profile.sum_mode, profile)?;
    if profile.noise {
        v += profile.noise_sigma() * key.standard_normal();
    }
    Ok(v.clamp(-profile.v_sat, profile.v_sat))
}

/// One patch assembled from several connected unit blocks whose capacitors
/// all share one summing node. Each block brings its own pixels and the
/// matching columns of the weight bank. Returns `Out_v` per vector, like
/// [`project_patch`].
pub fn project_connected(
    blocks: &[(&[f64], &WeightBank)],
    profile: &HardwareProfile,
    fidelity: Fidelity,
    noise: NoiseKey,
) -> Result<Vec<f64>> {
    let Some((_, first)) = blocks.first() else {
        return invalid("connected patch needs at least one block");
    };
    let m = first.m;
    for (pixels, bank) in blocks {
        if bank.m != m || bank.scale != first.scale {
            return invalid("connected blocks must share vector count and weight scale");
        }
        check_pixels(pixels, bank.columns, profile)?;
    }
    let total: usize = blocks.iter().map(|(p, _)| p.len()).sum();
    (0..m)
        .map(|v| match fidelity {
            Fidelity::Ideal => {
                let dot: f64 = blocks
                    .iter()
                    .flat_map(|(p, b)| b.row(v).iter().zip(p.iter()))
                    .map(|(w, p)| w * p)
                    .sum();
                Ok(dot / total as f64)
            }
            Fidelity::Analog => {
                let charges = blocks
                    .iter()
                    .flat_map(|(p, b)| p.iter().zip(b.row(v)))
                    .map(|(&p, &w)| pwm_multiply(p, w, profile, None))
                    .collect::<Result<Vec<_>>>()?;
                settle(&charges, profile, noise.vector(v as u32))
            }
        }
        .map(|s| profile.v_r + s))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchFeatures {
    /// Row-major index into the tiling.
    pub patch: u32,
    /// `Out_v - V_R` for each vector, volts.
    pub signal: Vec<f64>,
}

/// Amplifier outputs for the selected patches of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogFeatureFrame {
    pub frame_index: u32,
    pub m: usize,
    pub v_r: f64,
    /// Patches in ascending index order.
    pub patches: Vec<PatchFeatures>,
}

impl AnalogFeatureFrame {
    /// Absolute output voltage `Out_v` of entry `k`, vector `v`.
    pub fn out_v(&self, k: usize, v: usize) -> f64 {
        self.v_r + self.patches[k].signal[v]
    }

    pub fn feature_count(&self) -> usize {
        self.patches.len() * self.m
    }

    pub fn get(&self, patch: u32) -> Option<&PatchFeatures> {
        self.patches
            .binary_search_by_key(&patch, |p| p.patch)
            .ok()
            .map(|k| &self.patches[k])
    }
}

/// Projects every selected patch of a frame.
///
/// Patches are independent and are computed in parallel when the `parallel`
/// feature is on; noise is keyed on `(seed, frame, patch, vector)` so the
/// result does not depend on scheduling.
pub fn run_frame(
    arr: &AnalogPixelArray,
    tiling: &PatchTiling,
    bank: &WeightBank,
    mask: &SelectionMask,
    profile: &HardwareProfile,
    fidelity: Fidelity,
    frame_index: u32,
) -> Result<AnalogFeatureFrame> {
    profile.validate()?;
    mask.check_against(tiling)?;
    if tiling.sensor_w != arr.width || tiling.sensor_h != arr.height {
        return invalid(format!(
            "tiling is for a {}x{} sensor, array is {}x{}",
            tiling.sensor_w, tiling.sensor_h, arr.width, arr.height
        ));
    }
    if bank.columns != tiling.pixels_per_patch() {
        return invalid(format!(
            "weight bank has {} columns, patches have {} pixels",
            bank.columns,
            tiling.pixels_per_patch()
        ));
    }
    if !tiling.vector_offsets.is_empty() && tiling.vector_offsets.len() != bank.m {
        return invalid(format!(
            "{} vector offsets for {} vectors",
            tiling.vector_offsets.len(),
            bank.m
        ));
    }
    let selected: Vec<usize> = mask.selected().collect();
    let key = NoiseKey::new(profile.noise_seed, Domain::Analog).frame(frame_index);

    let one = |p: usize| -> Result<PatchFeatures> {
        let key = key.patch(p as u32);
        let signal = if tiling.vector_offsets.is_empty() {
            let pixels = gather_patch(arr, tiling.patches[p])?;
            project_patch_signal(&pixels, bank, profile, fidelity, key)?
        } else {
            (0..bank.m)
                .map(|v| {
                    let pixels = gather_patch(arr, tiling.window(p, v))?;
                    check_pixels(&pixels, bank.columns, profile)?;
                    project_vector(&pixels, bank.row(v), profile, fidelity, key.vector(v as u32))
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(PatchFeatures {
            patch: p as u32,
            signal,
        })
    };

    #[cfg(feature = "parallel")]
    let patches = {
        use rayon::prelude::*;
        selected.par_iter().map(|&p| one(p)).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let patches = selected.iter().map(|&p| one(p)).collect::<Result<Vec<_>>>()?;

    Ok(AnalogFeatureFrame {
        frame_index,
        m: bank.m,
        v_r: profile.v_r,
        patches,
    })
}

/// Attention neighborhood: the output slot and its weighted members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub output: u32,
    /// `(patch index, attention coefficient)` pairs.
    pub members: Vec<(u32, f64)>,
}

/// Second-layer patch module: each neighborhood's output is the charge-shared
/// mean of its members' feature vectors, each scaled by the power-of-two
/// quantized attention coefficient.
pub fn attention_layer(
    features: &AnalogFeatureFrame,
    neighborhoods: &[Neighborhood],
    profile: &HardwareProfile,
    fidelity: Fidelity,
) -> Result<AnalogFeatureFrame> {
    let key = NoiseKey::new(profile.noise_seed, Domain::Analog)
        .frame(features.frame_index)
        .pixel(1);
    let mut patches = Vec::with_capacity(neighborhoods.len());
    for hood in neighborhoods {
        if hood.members.is_empty() {
            return invalid(format!("neighborhood {} has no members", hood.output));
        }
        let members = hood
            .members
            .iter()
            .map(|&(p, alpha)| {
                features
                    .get(p)
                    .map(|f| (f, qth_quantize(alpha)))
                    .ok_or_else(|| {
                        crate::Error::InvalidArgument(format!(
                            "neighborhood {} references patch {p}, which has no features",
                            hood.output
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let signal = (0..features.m)
            .map(|v| match fidelity {
                Fidelity::Ideal => Ok(members
                    .iter()
                    .map(|(f, q)| q * f.signal[v])
                    .sum::<f64>()
                    / members.len() as f64),
                Fidelity::Analog => {
                    let charges: Vec<CapCharge> = members
                        .iter()
                        .map(|(f, q)| CapCharge {
                            voltage: (q * f.signal[v]).clamp(-profile.v_sat, profile.v_sat),
                        })
                        .collect();
                    settle(&charges, profile, key.patch(hood.output).vector(v as u32))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        patches.push(PatchFeatures {
            patch: hood.output,
            signal,
        });
    }
    patches.sort_by_key(|p| p.patch);
    if patches.windows(2).any(|w| w[0].patch == w[1].patch) {
        return invalid("two neighborhoods share an output slot");
    }
    Ok(AnalogFeatureFrame {
        frame_index: features.frame_index,
        m: features.m,
        v_r: features.v_r,
        patches,
    })
}
