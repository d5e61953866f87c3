//! Unified run configuration, read from a single JSON document.
//!
//! Every section is optional; missing keys take the documented defaults and
//! unknown keys are rejected. [`RunConfig::effective_json`] writes the fully
//! materialized configuration back out so a run can be reproduced from its
//! log alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analog_compute::HardwareProfile;
use crate::error::{invalid, Error, Result};
use crate::patch_engine::{build_tiling, Fidelity, PatchTiling};
use crate::perf_model::{AreaTable, PowerConfig, TimingConfig};
use crate::readout::AdcConfig;
use crate::sensor_frontend::{BayerPattern, ExposureConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TilingConfig {
    pub patch_w: usize,
    pub patch_h: usize,
    pub origin_x: usize,
    pub origin_y: usize,
    /// Optional per-vector `(dx, dy)` window shifts.
    pub vector_offsets: Vec<(i32, i32)>,
}

impl Default for TilingConfig {
    fn default() -> Self {
        Self {
            patch_w: 32,
            patch_h: 32,
            origin_x: 0,
            origin_y: 0,
            vector_offsets: Vec::new(),
        }
    }
}

impl TilingConfig {
    pub fn build(&self, sensor_w: usize, sensor_h: usize) -> Result<PatchTiling> {
        let t = build_tiling(
            sensor_w,
            sensor_h,
            self.patch_w,
            self.patch_h,
            self.origin_x,
            self.origin_y,
        )?;
        if self.vector_offsets.is_empty() {
            Ok(t)
        } else {
            t.with_vector_offsets(self.vector_offsets.clone())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub exposure: ExposureConfig,
    pub hardware: HardwareProfile,
    pub adc: AdcConfig,
    pub timing: TimingConfig,
    pub power: PowerConfig,
    pub area: AreaTable,
    pub tiling: TilingConfig,
    pub pattern: BayerPattern,
    /// Lens antialias cutoff as a fraction of Nyquist; `null` skips it.
    pub antialias_cutoff: Option<f64>,
    pub fidelity: Fidelity,
    /// Fraction kept by the variance heuristic when no mask is supplied.
    pub selection_fraction: f64,
    pub input: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub mask: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            exposure: ExposureConfig::default(),
            hardware: HardwareProfile::default(),
            adc: AdcConfig::default(),
            timing: TimingConfig::default(),
            power: PowerConfig::default(),
            area: AreaTable::default(),
            tiling: TilingConfig::default(),
            pattern: BayerPattern::Rggb,
            antialias_cutoff: None,
            fidelity: Fidelity::Analog,
            selection_fraction: 0.25,
            input: None,
            weights: None,
            mask: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format {
            what: "config",
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn effective_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Cross-section consistency on top of each section's own checks.
    pub fn validate(&self) -> Result<()> {
        self.exposure.validate()?;
        self.hardware.validate()?;
        self.adc.validate()?;
        self.power.validate()?;
        if self.exposure.v_sat != self.hardware.v_sat {
            return invalid(format!(
                "exposure.V_sat ({}) and hardware.V_sat ({}) disagree",
                self.exposure.v_sat, self.hardware.v_sat
            ));
        }
        if let Some(c) = self.antialias_cutoff {
            if !(c > 0.0 && c <= 1.0) {
                return invalid(format!("antialias_cutoff {c} outside (0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.selection_fraction) {
            return invalid("selection_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn field_names_follow_hardware_notation() {
        let cfg = RunConfig::from_json(
            r#"{"hardware": {"V_R": 0.8, "V_sat": 1.0, "tau_leak": 1e-4,
                             "sum_mode": {"variant": "PASSIVE", "hold_time": 5e-6}},
                "timing": {"M": 192, "C": 4},
                "power": {"E_adc": 1e-9},
                "pattern": "GRBG", "fidelity": "ideal"}"#,
        )
        .unwrap();
        assert_eq!(cfg.hardware.v_r, 0.8);
        assert_eq!(cfg.timing.m, 192);
        assert_eq!(cfg.timing.c, 4);
        assert_eq!(cfg.power.e_adc, 1e-9);
        assert_eq!(cfg.pattern, BayerPattern::Grbg);
        assert_eq!(cfg.fidelity, Fidelity::Ideal);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"hardwre": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"hardware": {"v_r": 1.0}}"#).is_err());
    }

    #[test]
    fn effective_json_round_trips() {
        let cfg = RunConfig {
            antialias_cutoff: Some(0.5),
            ..Default::default()
        };
        assert_eq!(RunConfig::from_json(&cfg.effective_json()).unwrap(), cfg);
    }

    #[test]
    fn inconsistent_saturation_rejected() {
        let mut cfg = RunConfig::default();
        cfg.exposure.v_sat = 0.9;
        assert!(cfg.validate().is_err());
    }
}
