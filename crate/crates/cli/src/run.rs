//! `simulate` and `oracle`: images in, feature files and a run log out.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use ipsim_core::io::{load_image, read_mask, read_weight_bank, write_features, FeatureFormat};
use ipsim_core::pipeline::{oracle_frame, simulate_frame};
use ipsim_core::{build_tiling, Fidelity, RgbImage, RunConfig, SelectionMask, WeightBank};
use serde::Serialize;

use crate::failure::{CliResult, Failure, Kind};
use crate::{require, FormatArg, OutputFormat};

const IMAGE_EXTENSIONS: [&str; 3] = ["pgm", "ppm", "png"];

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// JSON run configuration; absent keys take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Image file, or a directory of numbered frames.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Weight bank (IPWB).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Selection mask file, or a directory with one mask per frame.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Feature file, or a directory when the input is a directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub format: FormatArg,
    /// Write raw ADC codes instead of dequantized features where available.
    #[arg(long)]
    pub codes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FidelityArg {
    Ideal,
    Analog,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub fidelity: Option<FidelityArg>,
    /// Noise seed; overrides `hardware.noise_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy)]
enum Mode {
    Simulate,
    Oracle,
}

#[derive(Serialize)]
struct FrameLog {
    index: u32,
    input: PathBuf,
    output: PathBuf,
    mask: String,
    patches_total: usize,
    patches_emitted: usize,
}

#[derive(Serialize)]
struct RunLog<'a> {
    command: &'static str,
    fidelity: &'static str,
    seed: u64,
    weights: &'a Path,
    format: &'static str,
    codes: bool,
    frames: Vec<FrameLog>,
    config: serde_json::Value,
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut cfg = load_config(&args.run)?;
    if let Some(f) = args.fidelity {
        cfg.fidelity = match f {
            FidelityArg::Ideal => Fidelity::Ideal,
            FidelityArg::Analog => Fidelity::Analog,
        };
    }
    if let Some(seed) = args.seed {
        cfg.hardware.noise_seed = seed;
    }
    execute(&args.run, cfg, Mode::Simulate)
}

pub fn oracle(args: RunArgs) -> CliResult<()> {
    let cfg = load_config(&args)?;
    execute(&args, cfg, Mode::Oracle)
}

fn load_config(args: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(|e| Failure::reading(path, e))?
        }
        None => RunConfig::default(),
    };
    for (slot, flag) in [
        (&mut cfg.input, &args.input),
        (&mut cfg.weights, &args.weights),
        (&mut cfg.mask, &args.mask),
        (&mut cfg.out, &args.out),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    cfg.validate()
        .map_err(|e| Failure::new(Kind::Config, e.to_string()))?;
    // Tiling parameters on their own, before any image is known.
    let t = &cfg.tiling;
    build_tiling(
        t.origin_x + t.patch_w + 8,
        t.origin_y + t.patch_h + 8,
        t.patch_w,
        t.patch_h,
        t.origin_x,
        t.origin_y,
    )
    .map_err(|e| Failure::new(Kind::Config, e.to_string()))?;
    Ok(cfg)
}

/// Frames in processing order: a single file, or every image in a
/// directory sorted by the number embedded in its name.
fn list_frames(input: &Path) -> CliResult<Vec<PathBuf>> {
    let meta = fs::metadata(input)
        .map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", input.display())))?;
    if !meta.is_dir() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut frames = list_dir(input, |p| {
        p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
    })?;
    if frames.is_empty() {
        return Err(Failure::new(
            Kind::Io,
            format!("{}: no .pgm/.ppm/.png frames", input.display()),
        ));
    }
    frames.sort_by_key(|p| frame_key(p));
    Ok(frames)
}

fn list_dir(dir: &Path, keep: impl Fn(&Path) -> bool) -> CliResult<Vec<PathBuf>> {
    let io = |e: std::io::Error| Failure::new(Kind::Io, format!("{}: {e}", dir.display()));
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && keep(&path) {
            out.push(path);
        }
    }
    Ok(out)
}

/// `(number, name)`: `frame2` sorts before `frame10`.
fn frame_key(p: &Path) -> (u64, String) {
    let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
    let digits: String = stem
        .chars()
        .rev()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    (digits.parse().unwrap_or(u64::MAX), stem)
}

/// One mask per frame: none, the same file for all, or a directory of
/// `.mask` files matched to frames in sorted order.
fn frame_masks(mask: Option<&Path>, frames: usize) -> CliResult<Vec<Option<(String, SelectionMask)>>> {
    let Some(path) = mask else {
        return Ok(vec![None; frames]);
    };
    let read = |p: &Path| -> CliResult<(String, SelectionMask)> {
        Ok((p.display().to_string(), read_mask(p).map_err(|e| Failure::reading(p, e))?))
    };
    if path.is_dir() {
        let mut files = list_dir(path, |p| p.extension().is_some_and(|e| e == "mask"))?;
        files.sort_by_key(|p| frame_key(p));
        if files.len() != frames {
            return Err(Failure::new(
                Kind::Shape,
                format!("{} masks in {} for {frames} frames", files.len(), path.display()),
            ));
        }
        files.iter().map(|p| read(p).map(Some)).collect()
    } else {
        let m = read(path)?;
        Ok(vec![Some(m); frames])
    }
}

/// Input-shape checks that map to the shape exit code instead of the
/// generic invariant one.
fn check_shapes(
    img: &RgbImage,
    bank: &WeightBank,
    mask: Option<&SelectionMask>,
    cfg: &RunConfig,
) -> CliResult<usize> {
    let shape = |m: String| Failure::new(Kind::Shape, m);
    let (w, h) = (img.width(), img.height());
    if cfg.pattern.is_mosaic() && (w % 2 != 0 || h % 2 != 0) {
        return Err(shape(format!("{w}x{h} image has odd dimensions for a {} mosaic", cfg.pattern)));
    }
    let tiling = cfg.tiling.build(w, h).map_err(|e| shape(e.to_string()))?;
    if bank.columns() != tiling.pixels_per_patch() {
        return Err(shape(format!(
            "weight bank has {} columns, {}x{} patches have {} pixels",
            bank.columns(),
            tiling.patch_w,
            tiling.patch_h,
            tiling.pixels_per_patch()
        )));
    }
    if !cfg.tiling.vector_offsets.is_empty() && cfg.tiling.vector_offsets.len() != bank.m() {
        return Err(Failure::new(
            Kind::Config,
            format!("{} vector offsets for {} vectors", cfg.tiling.vector_offsets.len(), bank.m()),
        ));
    }
    if let Some(m) = mask {
        if m.len() != tiling.patch_count() {
            return Err(shape(format!(
                "mask has {} entries, {w}x{h} image has {} patches",
                m.len(),
                tiling.patch_count()
            )));
        }
    }
    Ok(tiling.patch_count())
}

fn execute(args: &RunArgs, cfg: RunConfig, mode: Mode) -> CliResult<()> {
    let input = require(cfg.input.clone(), "--input")?;
    let weights = require(cfg.weights.clone(), "--weights")?;
    let out = require(cfg.out.clone(), "--out")?;
    let frames = list_frames(&input)?;
    let masks = frame_masks(cfg.mask.as_deref(), frames.len())?;
    let bank = read_weight_bank(&weights).map_err(|e| Failure::reading(&weights, e))?;

    let (format, ext) = match args.format.format {
        OutputFormat::Bin => (FeatureFormat::Bin, "ipff"),
        OutputFormat::Csv => (FeatureFormat::Csv, "csv"),
    };
    let many = input.is_dir();
    let io_err = |p: &Path, e: ipsim_core::Error| Failure::reading(p, e);
    if many {
        fs::create_dir_all(&out)
            .map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", out.display())))?;
    }

    let mut logs = Vec::with_capacity(frames.len());
    for (i, (frame, mask)) in frames.iter().zip(&masks).enumerate() {
        let index = if many { i as u32 } else { 0 };
        let img = load_image(frame).map_err(|e| io_err(frame, e))?;
        let mask_bits = mask.as_ref().map(|(_, m)| m);
        let patches_total = check_shapes(&img, &bank, mask_bits, &cfg)?;
        let features = match mode {
            Mode::Simulate => simulate_frame(&img, &bank, mask_bits, &cfg, index)?,
            Mode::Oracle => oracle_frame(&img, &bank, mask_bits, &cfg, index)?,
        };
        let target = if many {
            let stem = frame.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
            out.join(format!("{stem}.{ext}"))
        } else {
            out.clone()
        };
        write_features(&target, &features, format, args.codes).map_err(|e| io_err(&target, e))?;
        logs.push(FrameLog {
            index,
            input: frame.clone(),
            output: target,
            mask: mask
                .as_ref()
                .map_or_else(|| format!("top-variance {}", cfg.selection_fraction), |(p, _)| p.clone()),
            patches_total,
            patches_emitted: features.patches.len(),
        });
    }

    let log = RunLog {
        command: match mode {
            Mode::Simulate => "simulate",
            Mode::Oracle => "oracle",
        },
        fidelity: match (mode, cfg.fidelity) {
            (Mode::Oracle, _) => "exact",
            (_, Fidelity::Ideal) => "ideal",
            (_, Fidelity::Analog) => "analog",
        },
        seed: cfg.hardware.noise_seed,
        weights: &weights,
        format: ext,
        codes: args.codes,
        frames: logs,
        config: serde_json::to_value(&cfg).expect("config serializes"),
    };
    let log_path = if many {
        out.join("run.log.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".log.json");
        out.with_file_name(name)
    };
    let text = serde_json::to_string_pretty(&log).expect("log serializes");
    fs::write(&log_path, text + "\n")
        .map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", log_path.display())))
}
