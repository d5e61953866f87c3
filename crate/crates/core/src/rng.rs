//! Counter-based noise source.
//!
//! Every random draw is a pure function of its coordinates
//! `(seed, domain, frame, patch, vector, pixel)`, so a frame simulated on one
//! thread or on sixty-four produces identical samples. There is no generator
//! state to share or advance.

use std::f64::consts::TAU;

/// Independent noise streams. Two draws with identical coordinates but
/// different domains are uncorrelated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum Domain {
    /// Sensor read noise applied at exposure.
    Read = 1,
    /// Aggregate analog noise at the charge-sharing node.
    Analog = 2,
    /// Per-product noise for standalone PWM multiplies.
    Pwm = 3,
    /// Synthetic test content (image generators, random banks).
    Synthetic = 4,
}

/// Coordinates of one random draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub seed: u64,
    pub domain: Domain,
    pub frame: u32,
    pub patch: u32,
    pub vector: u32,
    pub pixel: u32,
}

impl NoiseKey {
    pub fn new(seed: u64, domain: Domain) -> Self {
        Self {
            seed,
            domain,
            frame: 0,
            patch: 0,
            vector: 0,
            pixel: 0,
        }
    }

    pub fn frame(mut self, frame: u32) -> Self {
        self.frame = frame;
        self
    }

    pub fn patch(mut self, patch: u32) -> Self {
        self.patch = patch;
        self
    }

    pub fn vector(mut self, vector: u32) -> Self {
        self.vector = vector;
        self
    }

    pub fn pixel(mut self, pixel: u32) -> Self {
        self.pixel = pixel;
        self
    }

    /// 64 random bits for this key; `lane` selects among independent words.
    pub fn bits(&self, lane: u32) -> u64 {
        let mut h = mix(self.seed ^ 0x243F_6A88_85A3_08D3);
        h = mix(h ^ ((self.domain as u64) << 32 | lane as u64));
        h = mix(h ^ ((self.frame as u64) << 32 | self.patch as u64));
        mix(h ^ ((self.vector as u64) << 32 | self.pixel as u64))
    }

    /// Uniform in the open interval (0, 1).
    pub fn uniform(&self, lane: u32) -> f64 {
        // 53 significant bits, offset by half a step so 0 is never produced.
        ((self.bits(lane) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box-Muller on lanes 0 and 1).
    pub fn standard_normal(&self) -> f64 {
        let u1 = self.uniform(0);
        let u2 = self.uniform(1);
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }
}

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
