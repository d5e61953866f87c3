//! Behavioral models of the in-pixel switched-capacitor primitives.
//!
//! Voltages are in volts, weights are dimensionless and already normalized
//! into `[-1, 1]` by the weight bank. Nothing here models transistor-level
//! behavior; each primitive is the charge-conservation identity it implements
//! plus the quantization and noise the circuit adds on top.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::NoiseKey;

/// Passive droop constant calibrated so a held charge loses exactly 10% in
/// 10 us: `tau = -10 us / ln(0.9)`, about 94.9 us.
pub fn calibrated_tau_leak() -> f64 {
    -10e-6 / 0.9_f64.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SumVariant {
    /// Bare capacitor node; charge leaks through the off switches.
    Passive,
    /// Capacitors sit in an amplifier feedback loop that holds the charge.
    Opamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SumMode {
    pub variant: SumVariant,
    /// Seconds between charge sharing and readout; only PASSIVE uses it.
    pub hold_time: f64,
}

impl SumMode {
    pub fn opamp() -> Self {
        Self {
            variant: SumVariant::Opamp,
            hold_time: 0.0,
        }
    }

    pub fn passive(hold_time: f64) -> Self {
        Self {
            variant: SumVariant::Passive,
            hold_time,
        }
    }
}

impl Default for SumMode {
    fn default() -> Self {
        Self::opamp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareProfile {
    /// Amplifier reference voltage.
    #[serde(rename = "V_R")]
    pub v_r: f64,
    #[serde(rename = "V_sat")]
    pub v_sat: f64,
    /// Per-pixel storage capacitance, farads.
    #[serde(rename = "C_unit")]
    pub c_unit: f64,
    /// Passive droop time constant, seconds.
    pub tau_leak: f64,
    /// Fractional droop left over in OPAMP mode.
    pub opamp_residual: f64,
    pub pwm_bits: u32,
    pub weight_dac_bits: u32,
    /// Effective resolution of the aggregate analog noise.
    pub enob_analog: f64,
    /// Master switch for analog noise injection.
    pub noise: bool,
    pub noise_seed: u64,
    /// Logistic slope for the sigmoid activation, volts.
    pub v_scale: f64,
    pub sum_mode: SumMode,
}

impl Default for HardwareProfile {
    fn default() -> Self {
        Self {
            v_r: 1.0,
            v_sat: 1.0,
            c_unit: 30e-15,
            tau_leak: calibrated_tau_leak(),
            opamp_residual: 0.0,
            pwm_bits: 8,
            weight_dac_bits: 8,
            enob_analog: 6.0,
            noise: true,
            noise_seed: 0,
            v_scale: 0.1,
            sum_mode: SumMode::default(),
        }
    }
}

impl HardwareProfile {
    /// Noise off, 24-bit quantizers: numerically indistinguishable from
    /// real arithmetic at the voltages involved.
    pub fn near_ideal() -> Self {
        Self {
            noise: false,
            pwm_bits: 24,
            weight_dac_bits: 24,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("V_R", self.v_r),
            ("V_sat", self.v_sat),
            ("C_unit", self.c_unit),
            ("tau_leak", self.tau_leak),
            ("enob_analog", self.enob_analog),
            ("v_scale", self.v_scale),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return invalid(format!("{name} must be > 0, got {v}"));
        }
        if !(1..=52).contains(&self.pwm_bits) || !(1..=52).contains(&self.weight_dac_bits) {
            return invalid("pwm_bits and weight_dac_bits must lie in 1..=52");
        }
        if !(0.0..1.0).contains(&self.opamp_residual) {
            return invalid("opamp_residual must lie in [0, 1)");
        }
        if !(self.sum_mode.hold_time >= 0.0) {
            return invalid("hold_time must be >= 0");
        }
        Ok(())
    }

    /// Standard deviation of the injected analog noise, volts.
    pub fn noise_sigma(&self) -> f64 {
        self.v_sat / (2f64.powf(self.enob_analog) * 12f64.sqrt())
    }

    /// Step of the pulse-width quantizer over `[0, V_sat]`.
    pub fn pwm_step(&self) -> f64 {
        self.v_sat / 2f64.powi(self.pwm_bits as i32)
    }

    /// Step of the signed weight DAC over `[-1, 1]`.
    pub fn weight_step(&self) -> f64 {
        2.0 / 2f64.powi(self.weight_dac_bits as i32)
    }

    /// Droop multiplier applied to the shared charge.
    pub fn droop(&self, mode: &SumMode) -> f64 {
        match mode.variant {
            SumVariant::Passive => (-mode.hold_time / self.tau_leak).exp(),
            SumVariant::Opamp => 1.0 - self.opamp_residual,
        }
    }
}

/// Voltage left on one pixel's storage capacitor. Negative values stand for
/// reversed polarity (negative charging current).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CapCharge {
    pub voltage: f64,
}

fn quantize(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

/// PWM current-modulated multiply: the pixel voltage sets the pulse width,
/// the weight sets the charging current.
///
/// `noise` supplies the draw coordinates; pass `None` for a noise-free
/// product. Noise is also skipped when `profile.noise` is off.
pub fn pwm_multiply(
    pixel_v: f64,
    weight: f64,
    profile: &HardwareProfile,
    noise: Option<NoiseKey>,
) -> Result<CapCharge> {
    if !(0.0..=profile.v_sat).contains(&pixel_v) {
        return invalid(format!(
            "pixel voltage {pixel_v} outside [0, {}]",
            profile.v_sat
        ));
    }
    if !(weight.abs() <= 1.0) {
        return invalid(format!("weight {weight} outside [-1, 1]"));
    }
    let pulse = quantize(pixel_v, profile.pwm_step());
    let current = quantize(weight, profile.weight_step());
    let mut v = current * pulse;
    if let Some(key) = noise.filter(|_| profile.noise) {
        v += profile.noise_sigma() * key.standard_normal();
    }
    Ok(CapCharge {
        voltage: v.clamp(-profile.v_sat, profile.v_sat),
    })
}

/// Connects equal capacitors to one node: the result is the mean voltage,
/// scaled by the droop of the configured summing mode.
pub fn charge_share_sum(
    charges: &[CapCharge],
    mode: &SumMode,
    profile: &HardwareProfile,
) -> Result<f64> {
    if charges.is_empty() {
        return invalid("charge sharing needs at least one capacitor");
    }
    let total: f64 = charges.iter().map(|c| c.voltage).sum();
    Ok(total / charges.len() as f64 * profile.droop(mode))
}

/// Switches `k_extra` uncharged unit capacitors onto a charged one.
pub fn quantized_divide(v: f64, k_extra: i64) -> Result<f64> {
    if k_extra < 0 {
        return invalid(format!("k_extra must be >= 0, got {k_extra}"));
    }
    Ok(v / (1 + k_extra) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Plus,
    Minus,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Plus => 1.0,
            Polarity::Minus => -1.0,
        }
    }
}

/// Series connection of held voltages; `Minus` flips a capacitor first.
pub fn series_combine(terms: &[(f64, Polarity)]) -> Result<f64> {
    if terms.is_empty() {
        return invalid("series combination needs at least one term");
    }
    Ok(terms.iter().map(|(v, p)| p.sign() * v).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
}

/// 2T voltage-to-current activation; the bias voltage selects the knee.
pub fn activation(v: f64, bias: f64, kind: ActivationKind, profile: &HardwareProfile) -> f64 {
    match kind {
        ActivationKind::Relu => (v - bias).max(0.0),
        ActivationKind::Sigmoid => profile.v_sat / (1.0 + (-(v - bias) / profile.v_scale).exp()),
    }
}

/// Nearest signed power of two, rounding half-up in the exponent.
pub fn qth_quantize(w: f64) -> f64 {
    if w == 0.0 || !w.is_finite() {
        return w;
    }
    let e = (w.abs().log2() + 0.5).floor();
    // powi saturates cleanly at the f64 range limits.
    w.signum() * 2f64.powi(e.clamp(-1100.0, 1100.0) as i32)
}
