//! Edge ADC and the digital correction that turns amplifier outputs into
//! features: `Dig_Out_v = b_v + scale * (Out_v - V_R)`.

use serde::{Deserialize, Serialize};

use crate::analog_compute::HardwareProfile;
use crate::error::{invalid, Result};
use crate::patch_engine::{AnalogFeatureFrame, Fidelity, WeightBank};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdcConfig {
    pub bits: u32,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl Default for AdcConfig {
    /// 8 bits over `[0, 2 V_R]` with the default 1 V reference, so `V_R`
    /// sits at mid-scale and negative weighted sums stay in range.
    fn default() -> Self {
        Self {
            bits: 8,
            v_lo: 0.0,
            v_hi: 2.0,
        }
    }
}

impl AdcConfig {
    pub fn for_reference(bits: u32, v_r: f64) -> Self {
        Self {
            bits,
            v_lo: 0.0,
            v_hi: 2.0 * v_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=31).contains(&self.bits) {
            return invalid(format!("ADC bits {} outside 1..=31", self.bits));
        }
        if !(self.v_lo < self.v_hi) {
            return invalid("ADC range needs v_lo < v_hi");
        }
        Ok(())
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    /// Volts per code.
    pub fn lsb(&self) -> f64 {
        (self.v_hi - self.v_lo) / self.max_code() as f64
    }
}

/// Clamp, scale to the code range and round half-up.
pub fn adc_convert(v: f64, cfg: &AdcConfig) -> u32 {
    let x = (v.clamp(cfg.v_lo, cfg.v_hi) - cfg.v_lo) / (cfg.v_hi - cfg.v_lo);
    ((x * cfg.max_code() as f64 + 0.5).floor() as u32).min(cfg.max_code())
}

pub fn dequantize(code: u32, cfg: &AdcConfig) -> f64 {
    cfg.v_lo + code as f64 * cfg.lsb()
}

/// Dequantizes, removes the reference, undoes the weight normalization and
/// adds the bias.
pub fn digital_out(code: u32, cfg: &AdcConfig, v_r: f64, bias: f64, scale: f64) -> Result<f64> {
    if code > cfg.max_code() {
        return invalid(format!(
            "ADC code {code} exceeds {}-bit range",
            cfg.bits
        ));
    }
    Ok(bias + scale * (dequantize(code, cfg) - v_r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalPatch {
    pub patch: u32,
    pub features: Vec<f64>,
    /// Raw ADC codes; absent when the conversion was ideal.
    pub codes: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalFeatureFrame {
    pub frame_index: u32,
    pub m: usize,
    pub patches: Vec<DigitalPatch>,
}

impl DigitalFeatureFrame {
    pub fn feature_count(&self) -> usize {
        self.patches.len() * self.m
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.patches.iter().flat_map(|p| p.features.iter().copied())
    }
}

/// Converts every feature of every selected patch.
///
/// ANALOG fidelity goes through the ADC. IDEAL fidelity skips conversion
/// and applies the digital correction to the exact signal.
pub fn assemble_features(
    analog: &AnalogFeatureFrame,
    cfg: &AdcConfig,
    bank: &WeightBank,
    profile: &HardwareProfile,
    fidelity: Fidelity,
) -> Result<DigitalFeatureFrame> {
    cfg.validate()?;
    if analog.m != bank.m() {
        return invalid(format!(
            "analog frame has {} vectors, weight bank has {}",
            analog.m,
            bank.m()
        ));
    }
    let bias = bank.bias();
    let patches = analog
        .patches
        .iter()
        .map(|p| match fidelity {
            Fidelity::Ideal => Ok(DigitalPatch {
                patch: p.patch,
                features: p
                    .signal
                    .iter()
                    .zip(bias)
                    .map(|(s, b)| b + bank.scale() * s)
                    .collect(),
                codes: None,
            }),
            Fidelity::Analog => {
                let codes: Vec<u32> = p
                    .signal
                    .iter()
                    .map(|s| adc_convert(profile.v_r + s, cfg))
                    .collect();
                let features = codes
                    .iter()
                    .zip(bias)
                    .map(|(&c, &b)| digital_out(c, cfg, profile.v_r, b, bank.scale()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DigitalPatch {
                    patch: p.patch,
                    features,
                    codes: Some(codes),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DigitalFeatureFrame {
        frame_index: analog.frame_index,
        m: analog.m,
        patches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch_engine::PatchFeatures;

    #[test]
    fn range_ends() {
        let cfg = AdcConfig::default();
        assert_eq!(adc_convert(cfg.v_lo, &cfg), 0);
        assert_eq!(adc_convert(cfg.v_hi, &cfg), 255);
        assert_eq!(adc_convert(-5.0, &cfg), 0);
        assert_eq!(adc_convert(5.0, &cfg), 255);
    }

    #[test]
    fn mid_scale_rounds_up() {
        let cfg = AdcConfig {
            bits: 8,
            v_lo: 0.0,
            v_hi: 2.0,
        };
        // 1.0 / 2.0 * 255 = 127.5
        assert_eq!(adc_convert(1.0, &cfg), 128);
    }

    #[test]
    fn monotone_and_half_lsb() {
        let cfg = AdcConfig {
            bits: 10,
            v_lo: -0.5,
            v_hi: 1.5,
        };
        let mut last = 0;
        for i in 0..=20_000 {
            let v = -0.7 + 2.4 * i as f64 / 20_000.0;
            let c = adc_convert(v, &cfg);
            assert!(c >= last);
            last = c;
            if (cfg.v_lo..=cfg.v_hi).contains(&v) {
                assert!((dequantize(c, &cfg) - v).abs() <= cfg.lsb() / 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn digital_out_cases() {
        let cfg = AdcConfig::default();
        // Out_v == V_R: code sits at V_R only for an ideal converter, so use
        // a range where V_R is an exact code.
        let exact = AdcConfig {
            bits: 2,
            v_lo: 0.0,
            v_hi: 3.0,
        };
        let code = adc_convert(1.0, &exact);
        assert!((digital_out(code, &exact, 1.0, 0.1, 1.0).unwrap() - 0.1).abs() < 1e-15);
        let code = adc_convert(1.5, &AdcConfig::for_reference(24, 1.0));
        let f = digital_out(code, &AdcConfig::for_reference(24, 1.0), 1.0, 0.0, 1.0).unwrap();
        assert!((f - 0.5).abs() < 1e-6);
        assert!(digital_out(256, &cfg, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn assemble_cardinality_and_order() {
        let bank = WeightBank::new(2, 1, vec![1.0, 1.0], vec![0.0, 0.5]).unwrap();
        let profile = HardwareProfile::default();
        let empty = AnalogFeatureFrame {
            frame_index: 3,
            m: 2,
            v_r: 1.0,
            patches: vec![],
        };
        let d = assemble_features(&empty, &AdcConfig::default(), &bank, &profile, Fidelity::Analog).unwrap();
        assert_eq!(d.feature_count(), 0);
        assert_eq!(d.frame_index, 3);

        let one = AnalogFeatureFrame {
            patches: vec![
                PatchFeatures {
                    patch: 4,
                    signal: vec![0.25, -0.25],
                },
                PatchFeatures {
                    patch: 9,
                    signal: vec![0.0, 0.0],
                },
            ],
            ..empty
        };
        let d = assemble_features(&one, &AdcConfig::default(), &bank, &profile, Fidelity::Ideal).unwrap();
        assert_eq!(d.patches[0].patch, 4);
        assert_eq!(d.patches[1].patch, 9);
        assert_eq!(d.patches[0].features, vec![0.25, 0.25]);
        assert!(d.patches[0].codes.is_none());
        let a = assemble_features(&one, &AdcConfig::default(), &bank, &profile, Fidelity::Analog).unwrap();
        assert_eq!(a.patches[0].codes.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn adc_config_validation() {
        assert!(AdcConfig { bits: 0, ..Default::default() }.validate().is_err());
        assert!(AdcConfig { v_lo: 1.0, v_hi: 1.0, ..Default::default() }.validate().is_err());
    }
}
