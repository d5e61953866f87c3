use std::path::PathBuf;

use clap::Args;
use ipsim_core::io::read_features;
use ipsim_core::DigitalFeatureFrame;

use crate::failure::{CliResult, Failure, Kind};

#[derive(Args, Debug)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Largest absolute error that still passes.
    #[arg(long, default_value_t = 0.0)]
    pub tolerance: f64,
    /// Full-scale range for the implied ENOB, in feature units. The default
    /// is the ADC span for a weight bank with unit scale.
    #[arg(long, default_value_t = 2.0)]
    pub full_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub count: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub rms: f64,
    pub enob: f64,
}

pub fn stats(a: &DigitalFeatureFrame, b: &DigitalFeatureFrame, full_scale: f64) -> Result<Stats, String> {
    if a.m != b.m {
        return Err(format!("vector counts differ: {} vs {}", a.m, b.m));
    }
    if a.patches.len() != b.patches.len() {
        return Err(format!("patch counts differ: {} vs {}", a.patches.len(), b.patches.len()));
    }
    if let Some((x, y)) = a.patches.iter().zip(&b.patches).find(|(x, y)| x.patch != y.patch) {
        return Err(format!("patch sets differ: {} vs {}", x.patch, y.patch));
    }
    let (mut count, mut max_abs, mut sum_abs, mut sum_sq) = (0usize, 0.0f64, 0.0, 0.0);
    for (x, y) in a.values().zip(b.values()) {
        let d = (x - y).abs();
        count += 1;
        max_abs = max_abs.max(d);
        sum_abs += d;
        sum_sq += d * d;
    }
    let n = count.max(1) as f64;
    let rms = (sum_sq / n).sqrt();
    Ok(Stats {
        count,
        max_abs,
        mean_abs: sum_abs / n,
        rms,
        enob: (full_scale / (rms * 12f64.sqrt())).log2(),
    })
}

pub fn compare(args: CompareArgs) -> CliResult<()> {
    if !(args.tolerance >= 0.0) || !(args.full_scale > 0.0) {
        return Err(Failure::new(Kind::Usage, "--tolerance must be >= 0 and --full-scale > 0"));
    }
    let a = read_features(&args.a).map_err(|e| Failure::reading(&args.a, e))?;
    let b = read_features(&args.b).map_err(|e| Failure::reading(&args.b, e))?;
    let s = stats(&a, &b, args.full_scale).map_err(|m| Failure::new(Kind::Shape, m))?;
    println!(
        "count={} max_abs_err={:e} mean_abs_err={:e} rms={:e} enob={:.3}",
        s.count, s.max_abs, s.mean_abs, s.rms, s.enob
    );
    if s.max_abs > args.tolerance {
        return Err(Failure::new(
            Kind::Tolerance,
            format!("max error {:e} exceeds tolerance {:e}", s.max_abs, args.tolerance),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ipsim_core::readout::DigitalPatch;

    fn frame(vals: &[f64]) -> DigitalFeatureFrame {
        DigitalFeatureFrame {
            frame_index: 0,
            m: vals.len(),
            patches: vec![DigitalPatch {
                patch: 0,
                features: vals.to_vec(),
                codes: None,
            }],
        }
    }

    #[test]
    fn self_compare_is_exact() {
        let s = stats(&frame(&[1.0, 2.0]), &frame(&[1.0, 2.0]), 2.0).unwrap();
        assert_eq!((s.max_abs, s.rms), (0.0, 0.0));
        assert!(s.enob.is_infinite());
    }

    #[test]
    fn enob_from_rms() {
        // A uniform quantizer with step q has rms q / sqrt(12): ENOB = log2(FS / q).
        let q = 2.0 / 256.0;
        let e = q / 12f64.sqrt();
        let s = stats(&frame(&[e, -e]), &frame(&[0.0, 0.0]), 2.0).unwrap();
        assert!((s.enob - 8.0).abs() < 1e-12);
        assert!((s.mean_abs - e).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        assert!(stats(&frame(&[1.0]), &frame(&[1.0, 2.0]), 2.0).is_err());
        let mut other = frame(&[1.0]);
        other.patches[0].patch = 3;
        assert!(stats(&frame(&[1.0]), &other, 2.0).is_err());
    }
}
