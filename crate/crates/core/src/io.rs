//! File formats: images (binary PGM/PPM, PNG), weight banks (`IPWB`),
//! selection masks (one `0`/`1` per line) and feature frames (`IPFF` or CSV).
//!
//! All binary formats are little-endian.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::patch_engine::{SelectionMask, WeightBank};
use crate::readout::{DigitalFeatureFrame, DigitalPatch};
use crate::sensor_frontend::RgbImage;

pub const WEIGHT_MAGIC: &[u8; 4] = b"IPWB";
pub const FEATURE_MAGIC: &[u8; 4] = b"IPFF";
pub const FORMAT_VERSION: u16 = 1;
pub const CSV_HEADER: &str = "frame,patch,vector,value";

fn malformed(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Format {
        what,
        detail: detail.into(),
    }
}

/// Cursor over a byte slice for the little-endian readers.
struct Reader<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(malformed(self.what, "truncated"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| malformed(self.what, "size overflow"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    fn finish(self) -> Result<()> {
        if !self.buf.is_empty() {
            return Err(malformed(self.what, format!("{} trailing bytes", self.buf.len())));
        }
        Ok(())
    }
}

fn put_f32s(out: &mut Vec<u8>, vals: impl IntoIterator<Item = f64>) {
    for v in vals {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

// ---------------------------------------------------------------------------
// Images

/// Loads a binary PGM/PPM (maxval up to 65535) or an 8/16-bit PNG,
/// normalized to `[0, 1]`. Gray inputs come back with `r = g = b`.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    let bytes = fs::read(path)?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else {
        decode_png(bytes)
    }
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let deep = matches!(
        img.color(),
        image::ColorType::L16 | image::ColorType::La16 | image::ColorType::Rgb16 | image::ColorType::Rgba16
    );
    let data: Vec<[f64; 3]> = if deep {
        img.to_rgb16()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 65535.0))
            .collect()
    } else {
        img.to_rgb8()
            .pixels()
            .map(|p| p.0.map(|c| c as f64 / 255.0))
            .collect()
    };
    RgbImage::new(w, h, data)
}

fn decode_pnm(bytes: &[u8]) -> Result<RgbImage> {
    let channels = if bytes[1] == b'6' { 3 } else { 1 };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(malformed("PNM header", "truncated")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed("PNM header", "expected a number"))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(malformed("PNM header", "missing separator"));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(malformed("PNM header", format!("maxval {maxval}")));
    }
    let width = if maxval > 255 { 2 } else { 1 };
    let need = w * h * channels * width;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| malformed("PNM raster", "truncated"))?;
    let sample = |i: usize| -> f64 {
        let v = if width == 2 {
            u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]) as f64
        } else {
            raster[i] as f64
        };
        (v / maxval as f64).min(1.0)
    };
    let data = (0..w * h)
        .map(|p| {
            if channels == 3 {
                [sample(3 * p), sample(3 * p + 1), sample(3 * p + 2)]
            } else {
                let v = sample(p);
                [v, v, v]
            }
        })
        .collect();
    RgbImage::new(w, h, data)
}

/// Writes `img` as 16-bit PGM/PPM or PNG, chosen by extension. Images with
/// `r = g = b` everywhere are written single-channel.
pub fn save_image(path: &Path, img: &RgbImage) -> Result<()> {
    let gray = img.data().iter().all(|p| p[0] == p[1] && p[1] == p[2]);
    let q = |v: f64| (v * 65535.0).round() as u16;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "pgm" | "ppm" => {
            let rgb = ext == "ppm" || !gray;
            let mut out = format!(
                "{}\n{} {}\n65535\n",
                if rgb { "P6" } else { "P5" },
                img.width(),
                img.height()
            )
            .into_bytes();
            for p in img.data() {
                let chans: &[f64] = if rgb { p } else { &p[..1] };
                for &c in chans {
                    out.extend_from_slice(&q(c).to_be_bytes());
                }
            }
            fs::write(path, out)?;
        }
        "png" => {
            let (w, h) = (img.width() as u32, img.height() as u32);
            let dynamic = if gray {
                let buf = img.data().iter().map(|p| q(p[0])).collect();
                image::DynamicImage::ImageLuma16(
                    image::ImageBuffer::from_raw(w, h, buf).expect("buffer sized"),
                )
            } else {
                let buf = img.data().iter().flat_map(|p| p.map(q)).collect();
                image::DynamicImage::ImageRgb16(
                    image::ImageBuffer::from_raw(w, h, buf).expect("buffer sized"),
                )
            };
            dynamic.save_with_format(path, image::ImageFormat::Png)?;
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unsupported image extension {other:?} (use .pgm, .ppm or .png)"
            )))
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Weight banks

/// Serializes with un-normalized weights; reading re-applies normalization.
pub fn encode_weight_bank(bank: &WeightBank) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHT_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(bank.m() as u32).to_le_bytes());
    out.extend_from_slice(&(bank.columns() as u32).to_le_bytes());
    out.push(bank.source_rgb().is_some() as u8);
    put_f32s(&mut out, bank.raw_weights());
    put_f32s(&mut out, bank.bias().iter().copied());
    if let Some(src) = bank.source_rgb() {
        put_f32s(&mut out, src.iter().copied());
    }
    out
}

pub fn decode_weight_bank(bytes: &[u8]) -> Result<WeightBank> {
    let mut r = Reader {
        buf: bytes,
        what: "weight bank",
    };
    if r.take(4)? != WEIGHT_MAGIC {
        return Err(malformed("weight bank", "bad magic"));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(malformed("weight bank", format!("unsupported version {version}")));
    }
    let m = r.u32()? as usize;
    let columns = r.u32()? as usize;
    let flags = r.u8()?;
    let weights = r.f32s(m * columns)?;
    let bias = r.f32s(m)?;
    let mut bank = WeightBank::new(m, columns, weights, bias)?;
    if flags & 1 != 0 {
        bank = bank.with_source_rgb(r.f32s(m * columns * 3)?)?;
    }
    r.finish()?;
    Ok(bank)
}

pub fn write_weight_bank(path: &Path, bank: &WeightBank) -> Result<()> {
    Ok(fs::write(path, encode_weight_bank(bank))?)
}

pub fn read_weight_bank(path: &Path) -> Result<WeightBank> {
    decode_weight_bank(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// Selection masks

pub fn parse_mask(text: &str) -> Result<SelectionMask> {
    let bits = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| match l {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(malformed(
                "selection mask",
                format!("line {}: expected 0 or 1, got {other:?}", i + 1),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionMask::new(bits))
}

pub fn format_mask(mask: &SelectionMask) -> String {
    mask.bits()
        .iter()
        .map(|&b| if b { "1\n" } else { "0\n" })
        .collect()
}

pub fn read_mask(path: &Path) -> Result<SelectionMask> {
    parse_mask(&fs::read_to_string(path)?)
}

pub fn write_mask(path: &Path, mask: &SelectionMask) -> Result<()> {
    Ok(fs::write(path, format_mask(mask))?)
}

// ---------------------------------------------------------------------------
// Feature frames

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Bin,
    Csv,
}

/// Values written per feature; `codes` swaps in the raw ADC codes where
/// the frame has them.
fn feature_values(frame: &DigitalFeatureFrame, p: &DigitalPatch, codes: bool) -> Vec<f64> {
    match (&p.codes, codes) {
        (Some(c), true) => c.iter().map(|&c| c as f64).collect(),
        _ => {
            debug_assert_eq!(p.features.len(), frame.m);
            p.features.clone()
        }
    }
}

pub fn encode_features(frame: &DigitalFeatureFrame, format: FeatureFormat, codes: bool) -> Vec<u8> {
    match format {
        FeatureFormat::Bin => {
            let mut out = Vec::new();
            out.extend_from_slice(FEATURE_MAGIC);
            out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
            out.extend_from_slice(&frame.frame_index.to_le_bytes());
            out.extend_from_slice(&(frame.patches.len() as u32).to_le_bytes());
            out.extend_from_slice(&(frame.m as u32).to_le_bytes());
            for p in &frame.patches {
                out.extend_from_slice(&p.patch.to_le_bytes());
                put_f32s(&mut out, feature_values(frame, p, codes));
            }
            out
        }
        FeatureFormat::Csv => {
            let mut out = Vec::new();
            writeln!(out, "{CSV_HEADER}").unwrap();
            for p in &frame.patches {
                for (v, val) in feature_values(frame, p, codes).into_iter().enumerate() {
                    writeln!(out, "{},{},{},{val}", frame.frame_index, p.patch, v).unwrap();
                }
            }
            out
        }
    }
}

/// Reads either encoding; the binary magic decides.
pub fn decode_features(bytes: &[u8]) -> Result<DigitalFeatureFrame> {
    if bytes.starts_with(FEATURE_MAGIC) {
        decode_features_bin(bytes)
    } else {
        decode_features_csv(bytes)
    }
}

fn decode_features_bin(bytes: &[u8]) -> Result<DigitalFeatureFrame> {
    let mut r = Reader {
        buf: &bytes[4..],
        what: "feature file",
    };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(malformed("feature file", format!("unsupported version {version}")));
    }
    let frame_index = r.u32()?;
    let count = r.u32()? as usize;
    let m = r.u32()? as usize;
    let mut patches = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let patch = r.u32()?;
        patches.push(DigitalPatch {
            patch,
            features: r.f32s(m)?,
            codes: None,
        });
    }
    r.finish()?;
    Ok(DigitalFeatureFrame {
        frame_index,
        m,
        patches,
    })
}

fn decode_features_csv(bytes: &[u8]) -> Result<DigitalFeatureFrame> {
    let mut lines = bytes.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(malformed("feature CSV", format!("missing header {CSV_HEADER:?}"))),
    }
    let mut frame_index = None;
    let mut patches: Vec<DigitalPatch> = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || malformed("feature CSV", format!("line {}: {line:?}", n + 2));
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let [f, p, v, val] = cols[..] else {
            return Err(bad());
        };
        let f: u32 = f.parse().map_err(|_| bad())?;
        let p: u32 = p.parse().map_err(|_| bad())?;
        let v: usize = v.parse().map_err(|_| bad())?;
        let val: f64 = val.parse().map_err(|_| bad())?;
        if *frame_index.get_or_insert(f) != f {
            return Err(malformed("feature CSV", "rows from more than one frame"));
        }
        if patches.last().is_none_or(|last| last.patch != p) {
            patches.push(DigitalPatch {
                patch: p,
                features: Vec::new(),
                codes: None,
            });
        }
        let cur = patches.last_mut().unwrap();
        if v != cur.features.len() {
            return Err(malformed("feature CSV", format!("patch {p}: vector {v} out of order")));
        }
        cur.features.push(val);
    }
    let m = patches.first().map_or(0, |p| p.features.len());
    if patches.iter().any(|p| p.features.len() != m) {
        return Err(malformed("feature CSV", "patches have differing vector counts"));
    }
    Ok(DigitalFeatureFrame {
        frame_index: frame_index.unwrap_or(0),
        m,
        patches,
    })
}

pub fn write_features(
    path: &Path,
    frame: &DigitalFeatureFrame,
    format: FeatureFormat,
    codes: bool,
) -> Result<()> {
    Ok(fs::write(path, encode_features(frame, format, codes))?)
}

pub fn read_features(path: &Path) -> Result<DigitalFeatureFrame> {
    decode_features(&fs::read(path)?)
}
