//! Deterministic synthetic test images.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::{Domain, NoiseKey};
use crate::sensor_frontend::RgbImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticPattern {
    /// Horizontal ramp from 0 at the left edge to 1 at the right edge.
    Gradient,
    /// Alternating 0/1 pixels.
    Checker,
    /// Uniform noise in [0, 1).
    Noise,
}

impl fmt::Display for SyntheticPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gradient => "GRADIENT",
            Self::Checker => "CHECKER",
            Self::Noise => "NOISE",
        })
    }
}

impl FromStr for SyntheticPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GRADIENT" => Ok(Self::Gradient),
            "CHECKER" => Ok(Self::Checker),
            "NOISE" => Ok(Self::Noise),
            _ => Err(Error::InvalidArgument(format!(
                "unknown pattern {s:?} (GRADIENT, CHECKER, NOISE)"
            ))),
        }
    }
}

/// `color` draws independent noise per channel; the other patterns are gray.
pub fn synthesize(
    pattern: SyntheticPattern,
    w: usize,
    h: usize,
    seed: u64,
    color: bool,
) -> Result<RgbImage> {
    let key = NoiseKey::new(seed, Domain::Synthetic);
    RgbImage::from_fn(w, h, |x, y| match pattern {
        SyntheticPattern::Gradient => {
            let v = if w > 1 { x as f64 / (w - 1) as f64 } else { 0.0 };
            [v; 3]
        }
        SyntheticPattern::Checker => [((x + y) % 2) as f64; 3],
        SyntheticPattern::Noise => {
            let k = key.pixel((y * w + x) as u32);
            if color {
                [k.uniform(0), k.uniform(1), k.uniform(2)]
            } else {
                [k.uniform(0); 3]
            }
        }
    })
}
