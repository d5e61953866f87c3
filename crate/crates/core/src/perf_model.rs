//! Analytical frame-timing, power, area and data-reduction model.
//!
//! Independent of the signal-path simulator: everything here is closed-form
//! arithmetic over the configuration.
//!
//! Timing constants and per-event energies are calibration targets, not
//! measurements. `t_dac + t_pwm = 1.7 us` puts the 1080p, two-weight-line,
//! 400-vector, 32x32 point at 91.9 Hz. The default energies keep a 2 Mpix
//! sensor at 30 Hz with a quarter of its patches active under 60 mW, with
//! ADC conversion the largest term. `scripts/calibrate.py` re-derives both.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const WEIGHT_LINE_COUNTS: [u32; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutOverlap {
    /// Readout of frame k overlaps compute of frame k+1; the slower stage sets the pace.
    Pipelined,
    /// Compute then readout, back to back.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub sensor_w: usize,
    pub sensor_h: usize,
    pub patch_w: usize,
    pub patch_h: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Weight voltage lines per pixel column.
    #[serde(rename = "C")]
    pub c: u32,
    pub t_dac: f64,
    pub t_pwm: f64,
    pub t_exposure: f64,
    pub n_adc: usize,
    /// Conversions per second per ADC.
    pub f_adc: f64,
    pub active_fraction: f64,
    pub overlap: ReadoutOverlap,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            sensor_w: 1920,
            sensor_h: 1080,
            patch_w: 32,
            patch_h: 32,
            m: 400,
            c: 2,
            t_dac: 1.0e-6,
            t_pwm: 0.7e-6,
            t_exposure: 1.0e-3,
            // One column-parallel converter per pixel column.
            n_adc: 1920,
            f_adc: 1.0e6,
            active_fraction: 0.25,
            overlap: ReadoutOverlap::Pipelined,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        if !WEIGHT_LINE_COUNTS.contains(&self.c) {
            return invalid(format!("C = {} not in {WEIGHT_LINE_COUNTS:?}", self.c));
        }
        if self.patch_w == 0 || self.patch_h == 0 || self.m == 0 || self.n_adc == 0 {
            return invalid("patch dims, M and n_adc must be >= 1");
        }
        if self.sensor_w < self.patch_w || self.sensor_h < self.patch_h {
            return invalid("sensor smaller than one patch");
        }
        if !(self.t_dac > 0.0 && self.t_pwm > 0.0 && self.t_exposure > 0.0 && self.f_adc > 0.0) {
            return invalid("t_dac, t_pwm, t_exposure and f_adc must be > 0");
        }
        if !(0.0..=1.0).contains(&self.active_fraction) {
            return invalid("active_fraction must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn patch_count(&self) -> usize {
        (self.sensor_w / self.patch_w) * (self.sensor_h / self.patch_h)
    }

    pub fn sensor_pixels(&self) -> usize {
        self.sensor_w * self.sensor_h
    }

    /// ADC conversions per frame.
    pub fn conversions(&self) -> f64 {
        self.patch_count() as f64 * self.active_fraction * self.m as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameTiming {
    pub compute_s: f64,
    pub readout_s: f64,
    pub frame_s: f64,
}

/// Weights are broadcast along the columns, so every patch computes at once
/// and compute time does not depend on the patch count. Each vector needs
/// `ceil(patch_h / C)` program-and-integrate steps.
pub fn frame_time(cfg: &TimingConfig) -> Result<FrameTiming> {
    cfg.validate()?;
    let steps = cfg.patch_h.div_ceil(cfg.c as usize);
    let compute_s = (cfg.m * steps) as f64 * (cfg.t_dac + cfg.t_pwm);
    let readout_s = cfg.conversions() / (cfg.n_adc as f64 * cfg.f_adc);
    let busy = match cfg.overlap {
        ReadoutOverlap::Pipelined => compute_s.max(readout_s),
        ReadoutOverlap::Sequential => compute_s + readout_s,
    };
    // Exposure of the next frame runs alongside processing of this one.
    Ok(FrameTiming {
        compute_s,
        readout_s,
        frame_s: busy.max(cfg.t_exposure),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Throughput {
    pub frame_rate_hz: f64,
    pub mpix_per_s: f64,
}

pub fn throughput(cfg: &TimingConfig) -> Result<Throughput> {
    let t = frame_time(cfg)?;
    let frame_rate_hz = 1.0 / t.frame_s;
    Ok(Throughput {
        frame_rate_hz,
        mpix_per_s: cfg.sensor_pixels() as f64 * frame_rate_hz / 1e6,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    /// Joules per ADC conversion.
    #[serde(rename = "E_adc")]
    pub e_adc: f64,
    /// Joules per weight-line write.
    #[serde(rename = "E_dac")]
    pub e_dac: f64,
    #[serde(rename = "C_unit")]
    pub c_unit: f64,
    /// Mean charging swing on a pixel capacitor, volts.
    #[serde(rename = "V_drive")]
    pub v_drive: f64,
    /// Static power per patch amplifier, watts.
    #[serde(rename = "P_opamp")]
    pub p_opamp: f64,
    #[serde(rename = "P_misc")]
    pub p_misc: f64,
    /// Operating frame rate. `None` runs at the maximum the timing allows.
    pub frame_rate_hz: Option<f64>,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            e_adc: 5e-9,
            e_dac: 1e-12,
            c_unit: 30e-15,
            v_drive: 0.4,
            p_opamp: 0.5e-6,
            p_misc: 5e-3,
            frame_rate_hz: Some(30.0),
        }
    }
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.e_adc,
            self.e_dac,
            self.c_unit,
            self.v_drive,
            self.p_opamp,
            self.p_misc,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return invalid("power constants must be >= 0");
        }
        if let Some(f) = self.frame_rate_hz {
            if !(f > 0.0) {
                return invalid("frame_rate_hz must be > 0");
            }
        }
        Ok(())
    }
}

/// Milliwatts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub adc: f64,
    pub dac: f64,
    pub analog: f64,
    pub opamp: f64,
    pub misc: f64,
    pub total: f64,
}

impl PowerBreakdown {
    /// Name of the largest contributor, `misc` excluded.
    pub fn dominant(&self) -> &'static str {
        [
            ("adc", self.adc),
            ("dac", self.dac),
            ("analog", self.analog),
            ("opamp", self.opamp),
        ]
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(n, _)| n)
        .unwrap()
    }
}

/// Power at the operating frame rate. The digital interface is excluded.
pub fn power_estimate(tcfg: &TimingConfig, pcfg: &PowerConfig) -> Result<PowerBreakdown> {
    pcfg.validate()?;
    let rate = match pcfg.frame_rate_hz {
        Some(f) => {
            tcfg.validate()?;
            f
        }
        None => throughput(tcfg)?.frame_rate_hz,
    };
    let m = tcfg.m as f64;
    let adc = tcfg.conversions() * rate * pcfg.e_adc;
    // One write per column line per row step of every vector.
    let writes = m * tcfg.patch_h as f64 * tcfg.sensor_w as f64;
    let dac = writes * rate * pcfg.e_dac;
    let active_pixels = (tcfg.patch_count() * tcfg.patch_w * tcfg.patch_h) as f64 * tcfg.active_fraction;
    let analog = active_pixels * m * 0.5 * pcfg.c_unit * pcfg.v_drive * pcfg.v_drive * rate;
    let opamp = tcfg.patch_count() as f64 * pcfg.p_opamp;
    let misc = pcfg.p_misc;
    let mw = |w: f64| w * 1e3;
    Ok(PowerBreakdown {
        adc: mw(adc),
        dac: mw(dac),
        analog: mw(analog),
        opamp: mw(opamp),
        misc: mw(misc),
        total: mw(adc) + mw(dac) + mw(analog) + mw(opamp) + mw(misc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRow {
    pub name: String,
    pub count: f64,
    /// Square micrometres per instance.
    pub unit_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AreaTable {
    pub rows: Vec<AreaRow>,
}

impl Default for AreaTable {
    /// Per-pixel budget in 65 nm: 8 um photodiode, three 30 fF caps,
    /// 41 transistors, wiring and margin.
    fn default() -> Self {
        let row = |name: &str, count: f64, unit_area: f64| AreaRow {
            name: name.to_string(),
            count,
            unit_area,
        };
        Self {
            rows: vec![
                row("photo sensor", 1.0, 64.0),
                row("cap 30 fF", 3.0, 64.0),
                row("transistors", 41.0, 5.0),
                row("wiring", 1.0, 16.0),
                row("margin", 1.0, 8.0),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaEstimate {
    pub total_um2: f64,
    pub pitch_um: f64,
    pub occupancy: Vec<(String, f64)>,
}

pub fn area_estimate(table: &AreaTable) -> Result<AreaEstimate> {
    if table.rows.is_empty() {
        return invalid("area table is empty");
    }
    if table.rows.iter().any(|r| !(r.count >= 0.0) || !(r.unit_area > 0.0)) {
        return invalid("area rows need count >= 0 and unit area > 0");
    }
    let subtotal: Vec<f64> = table.rows.iter().map(|r| r.count * r.unit_area).collect();
    let total_um2: f64 = subtotal.iter().sum();
    if total_um2 <= 0.0 {
        return invalid("area table sums to zero");
    }
    Ok(AreaEstimate {
        total_um2,
        pitch_um: total_um2.sqrt(),
        occupancy: table
            .rows
            .iter()
            .zip(&subtotal)
            .map(|(r, s)| (r.name.clone(), s / total_um2))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub bayer: f64,
    pub rgb: f64,
}

/// Raw pixels per patch over features actually emitted per patch.
pub fn data_reduction(
    patch_w: usize,
    patch_h: usize,
    m: usize,
    active_fraction: f64,
) -> Result<Reduction> {
    if patch_w == 0 || patch_h == 0 || m == 0 || !(active_fraction > 0.0) {
        return invalid("data reduction needs positive patch dims, M and active fraction");
    }
    let bayer = (patch_w * patch_h) as f64 / (m as f64 * active_fraction);
    Ok(Reduction {
        bayer,
        rgb: 3.0 * bayer,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    pub frame_time_s: f64,
    pub frame_rate_hz: f64,
    pub mpix_per_s: f64,
    pub compute_time_s: f64,
    pub readout_time_s: f64,
    /// Frame rate the power figures assume.
    pub operating_rate_hz: f64,
    pub power_mw: PowerBreakdown,
    pub power_mw_per_mpix: f64,
    pub pitch_um: f64,
    pub area_um2: f64,
    pub reduction: Reduction,
}

pub fn perf_report(
    tcfg: &TimingConfig,
    pcfg: &PowerConfig,
    area: &AreaTable,
) -> Result<PerfReport> {
    let timing = frame_time(tcfg)?;
    let tp = throughput(tcfg)?;
    let power = power_estimate(tcfg, pcfg)?;
    let a = area_estimate(area)?;
    let reduction = data_reduction(tcfg.patch_w, tcfg.patch_h, tcfg.m, tcfg.active_fraction)
        .unwrap_or(Reduction {
            bayer: f64::INFINITY,
            rgb: f64::INFINITY,
        });
    Ok(PerfReport {
        frame_time_s: timing.frame_s,
        frame_rate_hz: tp.frame_rate_hz,
        mpix_per_s: tp.mpix_per_s,
        compute_time_s: timing.compute_s,
        readout_time_s: timing.readout_s,
        operating_rate_hz: pcfg.frame_rate_hz.unwrap_or(tp.frame_rate_hz),
        power_mw_per_mpix: power.total / (tcfg.sensor_pixels() as f64 / 1e6),
        power_mw: power,
        pitch_um: a.pitch_um,
        area_um2: a.total_um2,
        reduction,
    })
}

impl PerfReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for PerfReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.power_mw;
        writeln!(f, "frame time      {:>10.3} ms", self.frame_time_s * 1e3)?;
        writeln!(f, "  compute       {:>10.3} ms", self.compute_time_s * 1e3)?;
        writeln!(f, "  readout       {:>10.3} ms", self.readout_time_s * 1e3)?;
        writeln!(f, "frame rate      {:>10.2} Hz", self.frame_rate_hz)?;
        writeln!(f, "throughput      {:>10.2} Mpix/s", self.mpix_per_s)?;
        writeln!(f, "power @ {:.1} Hz", self.operating_rate_hz)?;
        writeln!(f, "  adc           {:>10.3} mW", p.adc)?;
        writeln!(f, "  dac           {:>10.3} mW", p.dac)?;
        writeln!(f, "  analog        {:>10.3} mW", p.analog)?;
        writeln!(f, "  opamp         {:>10.3} mW", p.opamp)?;
        writeln!(f, "  misc          {:>10.3} mW", p.misc)?;
        writeln!(f, "  total         {:>10.3} mW ({:.2} mW/Mpix)", p.total, self.power_mw_per_mpix)?;
        writeln!(f, "pixel area      {:>10.1} um^2", self.area_um2)?;
        writeln!(f, "pixel pitch     {:>10.2} um", self.pitch_um)?;
        write!(
            f,
            "data reduction  {:>10.2}x vs Bayer, {:.2}x vs RGB",
            self.reduction.bayer, self.reduction.rgb
        )
    }
}
