//! Pure-arithmetic reference features:
//!
//! ```text
//! Dig_Out_v = b_v + sum_i(W[v,i] * P_i) / N
//! ```
//!
//! evaluated straight from the raw (un-normalized) weights, without any
//! circuit model, quantizer or noise. Used as ground truth for the simulated
//! pipeline.

use crate::error::{invalid, Result};
use crate::patch_engine::{PatchTiling, SelectionMask, WeightBank};
use crate::readout::{DigitalFeatureFrame, DigitalPatch};
use crate::sensor_frontend::AnalogPixelArray;

/// Reference features for the selected patches of `pixels`.
///
/// `pixels` holds the photo-signal voltages `P_i` (after CDS).
pub fn reference_features(
    pixels: &AnalogPixelArray,
    tiling: &PatchTiling,
    bank: &WeightBank,
    mask: &SelectionMask,
    frame_index: u32,
) -> Result<DigitalFeatureFrame> {
    mask.check_against(tiling)?;
    let n = tiling.pixels_per_patch();
    if bank.columns() != n {
        return invalid(format!(
            "weight bank has {} columns, patches have {n} pixels",
            bank.columns()
        ));
    }
    if pixels.width != tiling.sensor_w || pixels.height != tiling.sensor_h {
        return invalid("pixel array does not match the tiling");
    }
    let raw = bank.raw_weights();
    let mut patches = Vec::new();
    for p in mask.selected() {
        let mut vals = Vec::with_capacity(n);
        for v in 0..bank.m() {
            let (dx, dy) = tiling.vector_offsets.get(v).copied().unwrap_or((0, 0));
            let r = tiling.patches[p];
            let (x0, y0) = ((r.x as i64 + dx as i64) as usize, (r.y as i64 + dy as i64) as usize);
            let row = &raw[v * n..(v + 1) * n];
            let mut terms = Vec::with_capacity(n);
            for y in 0..r.h {
                for x in 0..r.w {
                    terms.push(row[y * r.w + x] * pixels.get(x0 + x, y0 + y));
                }
            }
            let s: f64 = terms.into_iter().sum();
            vals.push(bank.bias()[v] + s / n as f64);
        }
        patches.push(DigitalPatch {
            patch: p as u32,
            features: vals,
            codes: None,
        });
    }
    Ok(DigitalFeatureFrame {
        frame_index,
        m: bank.m(),
        patches,
    })
}
