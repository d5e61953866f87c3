//! End-to-end frame processing: photons to digital features.

use crate::config::RunConfig;
use crate::error::{invalid, Result};
use crate::patch_engine::{run_frame, Fidelity, PatchTiling, SelectionMask, WeightBank};
use crate::readout::{assemble_features, DigitalFeatureFrame};
use crate::reference::reference_features;
use crate::rng::{Domain, NoiseKey};
use crate::sensor_frontend::{
    cds_sample, charge_dump, expose, expose_with_noise, gaussian_antialias, mosaic_bayer,
    AnalogPixelArray, BayerFrame, RgbImage,
};

/// Optics, mosaic, exposure and CDS. Read noise is applied only when
/// `noisy` is set.
pub fn sensor_pixels(
    img: &RgbImage,
    cfg: &RunConfig,
    frame_index: u32,
    noisy: bool,
) -> Result<AnalogPixelArray> {
    let filtered;
    let img = match cfg.antialias_cutoff {
        Some(c) => {
            filtered = gaussian_antialias(img, c)?;
            &filtered
        }
        None => img,
    };
    let raw = mosaic_bayer(img, cfg.pattern)?;
    let dark = BayerFrame {
        data: vec![0.0; raw.data.len()],
        ..raw.clone()
    };
    let (signal, reset) = if noisy {
        let key = NoiseKey::new(cfg.hardware.noise_seed, Domain::Read).frame(frame_index);
        (
            expose_with_noise(&raw, &cfg.exposure, key.vector(0))?,
            expose_with_noise(&dark, &cfg.exposure, key.vector(1))?,
        )
    } else {
        (expose(&raw, &cfg.exposure)?, expose(&dark, &cfg.exposure)?)
    };
    cds_sample(&signal, &reset)
}

/// Tiling, weight-bank compatibility and mask resolution shared by the
/// simulated and the reference paths.
pub struct FramePlan {
    pub tiling: PatchTiling,
    pub mask: SelectionMask,
}

pub fn plan_frame(
    pixels: &AnalogPixelArray,
    bank: &WeightBank,
    mask: Option<&SelectionMask>,
    cfg: &RunConfig,
) -> Result<FramePlan> {
    let tiling = cfg.tiling.build(pixels.width, pixels.height)?;
    if bank.columns() != tiling.pixels_per_patch() {
        return invalid(format!(
            "weight bank has {} columns but {}x{} patches have {} pixels",
            bank.columns(),
            tiling.patch_w,
            tiling.patch_h,
            tiling.pixels_per_patch()
        ));
    }
    bank.check_source(tiling.patch_w, tiling.patch_h, cfg.pattern)?;
    let mask = match mask {
        Some(m) => {
            m.check_against(&tiling)?;
            m.clone()
        }
        None => SelectionMask::top_variance(pixels, &tiling, cfg.selection_fraction)?,
    };
    Ok(FramePlan { tiling, mask })
}

/// Simulated pipeline at the configured fidelity.
pub fn simulate_frame(
    img: &RgbImage,
    bank: &WeightBank,
    mask: Option<&SelectionMask>,
    cfg: &RunConfig,
    frame_index: u32,
) -> Result<DigitalFeatureFrame> {
    cfg.validate()?;
    let analog = cfg.fidelity == Fidelity::Analog;
    let pixels = sensor_pixels(img, cfg, frame_index, analog)?;
    let plan = plan_frame(&pixels, bank, mask, cfg)?;
    let dumped = charge_dump(&pixels, &plan.tiling, &plan.mask)?;
    let frame = run_frame(
        &dumped,
        &plan.tiling,
        bank,
        &plan.mask,
        &cfg.hardware,
        cfg.fidelity,
        frame_index,
    )?;
    assemble_features(&frame, &cfg.adc, bank, &cfg.hardware, cfg.fidelity)
}

/// Reference features: noise-free sensor, then exact arithmetic.
pub fn oracle_frame(
    img: &RgbImage,
    bank: &WeightBank,
    mask: Option<&SelectionMask>,
    cfg: &RunConfig,
    frame_index: u32,
) -> Result<DigitalFeatureFrame> {
    cfg.validate()?;
    let pixels = sensor_pixels(img, cfg, frame_index, false)?;
    let plan = plan_frame(&pixels, bank, mask, cfg)?;
    reference_features(&pixels, &plan.tiling, bank, &plan.mask, frame_index)
}
