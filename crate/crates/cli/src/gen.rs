use std::path::PathBuf;

use clap::Args;
use ipsim_core::io::{save_image, write_weight_bank};
use ipsim_core::synthetic::{synthesize, SyntheticPattern};
use ipsim_core::{BayerPattern, Domain, NoiseKey, WeightBank};

use crate::failure::{CliResult, Failure, Kind};

#[derive(Args, Debug)]
pub struct GenArgs {
    /// GRADIENT, CHECKER or NOISE.
    pub pattern: SyntheticPattern,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent noise per color channel (NOISE only).
    #[arg(long)]
    pub color: bool,
    /// Output image: .pgm, .ppm or .png.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_image(args: GenArgs) -> CliResult<()> {
    if args.width == 0 || args.height == 0 {
        return Err(Failure::new(Kind::Usage, "--width and --height must be >= 1"));
    }
    let img = synthesize(args.pattern, args.width, args.height, args.seed, args.color)?;
    save_image(&args.out, &img).map_err(|e| Failure::reading(&args.out, e))
}

#[derive(Args, Debug)]
pub struct GenBankArgs {
    /// Projection vectors.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 32)]
    pub patch_w: usize,
    #[arg(long, default_value_t = 32)]
    pub patch_h: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weights are uniform in [-amplitude, amplitude].
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Biases are uniform in [-bias, bias].
    #[arg(long, default_value_t = 0.0)]
    pub bias: f64,
    /// Draw an RGB-trained matrix and strike it for this mosaic.
    #[arg(long, ignore_case = true)]
    pub rgb: Option<BayerPattern>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_bank(args: GenBankArgs) -> CliResult<()> {
    if !(args.amplitude >= 0.0 && args.bias >= 0.0) {
        return Err(Failure::new(Kind::Usage, "--amplitude and --bias must be >= 0"));
    }
    let n = args.patch_w * args.patch_h;
    let key = NoiseKey::new(args.seed, Domain::Synthetic);
    let draw = |lane: u32, count: usize, amp: f64| -> Vec<f64> {
        (0..count)
            .map(|i| amp * (2.0 * key.vector(lane).pixel(i as u32).uniform(0) - 1.0))
            .collect()
    };
    let bias = draw(1, args.m, args.bias);
    let bank = match args.rgb {
        Some(pattern) => WeightBank::from_rgb(
            args.m,
            args.patch_w,
            args.patch_h,
            draw(0, args.m * n * 3, args.amplitude),
            bias,
            pattern,
        )?,
        None => WeightBank::new(args.m, n, draw(0, args.m * n, args.amplitude), bias)?,
    };
    write_weight_bank(&args.out, &bank).map_err(|e| Failure::reading(&args.out, e))
}
