//! File formats: PNG images (sRGB color, 16-bit data grays, 1-bit masks),
//! PFM float maps, backlight-sequence directories with a JSON manifest,
//! contrast-map exports, and plain-text Zernike presets.

use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{linear_to_srgb, srgb_to_linear, ColorImage, Grid2};
use crate::render::{BacklightSequence, SubframeSchedule};
use crate::sim::{ContrastMap, FocalStack};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported or malformed file: {0}")]
    Format(String),
    #[error("sequence manifest: {0}")]
    Manifest(String),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// PNG

struct DecodedPng {
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: Vec<u8>,
}

fn decode_png(path: &Path) -> Result<DecodedPng, IoError> {
    let file = std::fs::File::open(path).map_err(file_err(path))?;
    let mut decoder = png::Decoder::new(file);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info()?;
    let mut data = vec![0u8; reader.output_buffer_size()];
    let info = reader.next_frame(&mut data)?;
    data.truncate(info.buffer_size());
    Ok(DecodedPng {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        data,
    })
}

/// Reads a color PNG as linear-light planes; sRGB transfer is removed.
/// Grayscale files broadcast to all three channels, alpha is dropped.
pub fn read_color_png(path: &Path) -> Result<ColorImage, IoError> {
    let png = decode_png(path)?;
    let (w, h) = (png.width, png.height);
    let channels = match png.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => {
            return Err(IoError::Format(format!(
                "{}: unsupported color type {other:?}",
                path.display()
            )))
        }
    };
    let sample = sample_reader(&png, path, channels)?;
    let mut planes = [
        Grid2::filled(w, h, 0.0),
        Grid2::filled(w, h, 0.0),
        Grid2::filled(w, h, 0.0),
    ];
    for y in 0..h {
        for x in 0..w {
            let base = (y * w + x) * channels;
            let rgb = match channels {
                1 | 2 => [sample(base); 3],
                _ => [sample(base), sample(base + 1), sample(base + 2)],
            };
            for (plane, v) in planes.iter_mut().zip(rgb) {
                *plane.get_mut(x, y) = srgb_to_linear(v);
            }
        }
    }
    Ok(ColorImage::from_planes(planes))
}

/// Reads a grayscale PNG as raw data values in [0, 1] (no transfer applied).
pub fn read_gray_png(path: &Path) -> Result<Grid2<f64>, IoError> {
    let png = decode_png(path)?;
    let channels = match png.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        other => {
            return Err(IoError::Format(format!(
                "{}: expected grayscale, got {other:?}",
                path.display()
            )))
        }
    };
    let sample = sample_reader(&png, path, channels)?;
    let mut out = Grid2::filled(png.width, png.height, 0.0);
    for y in 0..png.height {
        for x in 0..png.width {
            *out.get_mut(x, y) = sample((y * png.width + x) * channels);
        }
    }
    Ok(out)
}

/// Normalized sample accessor over 8- or 16-bit big-endian PNG data.
fn sample_reader<'a>(
    png: &'a DecodedPng,
    path: &Path,
    _channels: usize,
) -> Result<Box<dyn Fn(usize) -> f64 + 'a>, IoError> {
    match png.depth {
        png::BitDepth::Eight => {
            let data = &png.data;
            Ok(Box::new(move |i| data[i] as f64 / 255.0))
        }
        png::BitDepth::Sixteen => {
            let data = &png.data;
            Ok(Box::new(move |i| {
                u16::from_be_bytes([data[2 * i], data[2 * i + 1]]) as f64 / 65535.0
            }))
        }
        other => Err(IoError::Format(format!(
            "{}: unsupported bit depth {other:?}",
            path.display()
        ))),
    }
}

/// Writes a linear-light image as a 16-bit sRGB PNG, clipping to [0, 1].
pub fn write_color_png(path: &Path, image: &ColorImage) -> Result<(), IoError> {
    let (w, h) = (image.width(), image.height());
    let mut data = Vec::with_capacity(w * h * 6);
    for y in 0..h {
        for x in 0..w {
            for plane in &image.planes {
                let v = (linear_to_srgb(*plane.get(x, y)) * 65535.0).round() as u16;
                data.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    write_png(path, w, h, png::ColorType::Rgb, png::BitDepth::Sixteen, &data)
}

/// Writes raw data values in [0, 1] as a 16-bit grayscale PNG.
pub fn write_gray16_png(path: &Path, map: &Grid2<f64>) -> Result<(), IoError> {
    let (w, h) = (map.width(), map.height());
    let mut data = Vec::with_capacity(w * h * 2);
    for y in 0..h {
        for x in 0..w {
            let v = (map.get(x, y).clamp(0.0, 1.0) * 65535.0).round() as u16;
            data.extend_from_slice(&v.to_be_bytes());
        }
    }
    write_png(
        path,
        w,
        h,
        png::ColorType::Grayscale,
        png::BitDepth::Sixteen,
        &data,
    )
}

/// 1-bit grayscale mask. PNG packs pixels MSB-first within each scanline
/// byte.
pub fn write_mask_png(path: &Path, mask: &Grid2<bool>) -> Result<(), IoError> {
    let (w, h) = (mask.width(), mask.height());
    let stride = w.div_ceil(8);
    let mut data = vec![0u8; stride * h];
    for y in 0..h {
        for x in 0..w {
            if *mask.get(x, y) {
                data[y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    write_png(path, w, h, png::ColorType::Grayscale, png::BitDepth::One, &data)
}

pub fn read_mask_png(path: &Path) -> Result<Grid2<bool>, IoError> {
    let png = decode_png(path)?;
    if png.color != png::ColorType::Grayscale || png.depth != png::BitDepth::One {
        return Err(IoError::Format(format!(
            "{}: expected a 1-bit grayscale mask",
            path.display()
        )));
    }
    let (w, h) = (png.width, png.height);
    let stride = w.div_ceil(8);
    let mut out = Grid2::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            let byte = png.data[y * stride + x / 8];
            *out.get_mut(x, y) = byte & (0x80 >> (x % 8)) != 0;
        }
    }
    Ok(out)
}

fn write_png(
    path: &Path,
    w: usize,
    h: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    data: &[u8],
) -> Result<(), IoError> {
    let file = std::fs::File::create(path).map_err(file_err(path))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    encoder.set_color(color);
    encoder.set_depth(depth);
    encoder.set_compression(png::Compression::Default);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(data)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// PFM float maps

/// Writes a grayscale PFM ("Pf", little-endian, rows bottom-to-top).
pub fn write_pfm(path: &Path, map: &Grid2<f64>) -> Result<(), IoError> {
    let (w, h) = (map.width(), map.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&(*map.get(x, y) as f32).to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(file_err(path))
}

pub fn read_pfm(path: &Path) -> Result<Grid2<f64>, IoError> {
    let bytes = std::fs::read(path).map_err(file_err(path))?;
    let bad = |msg: &str| IoError::Format(format!("{}: {msg}", path.display()));
    // header: three whitespace-separated tokens
    let mut pos = 0usize;
    let mut token = || -> Result<String, IoError> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "Pf" {
        return Err(bad("not a grayscale PFM (magic must be Pf)"));
    }
    let w: usize = token()?.parse().map_err(|_| bad("bad width"))?;
    let h: usize = token()?.parse().map_err(|_| bad("bad height"))?;
    let scale: f64 = token()?.parse().map_err(|_| bad("bad scale"))?;
    pos += 1; // single whitespace after the scale line
    let little_endian = scale < 0.0;
    if bytes.len() < pos + w * h * 4 {
        return Err(bad("truncated pixel data"));
    }
    let mut out = Grid2::filled(w, h, 0.0);
    let mut offset = pos;
    for y in (0..h).rev() {
        for x in 0..w {
            let raw: [u8; 4] = bytes[offset..offset + 4].try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            *out.get_mut(x, y) = v as f64;
            offset += 4;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Depth maps

/// Units of float depth inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthUnits {
    Diopters,
    Meters,
}

/// Sidecar for 16-bit PNG depth maps: the diopter range the integer values
/// span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthSidecar {
    pub min_diopters: f64,
    pub max_diopters: f64,
}

/// Loads a depth map in diopters. PNG inputs need a `<stem>.json` sidecar
/// with the diopter range; PFM inputs carry diopters (or meters, converted
/// as 1/m) directly.
pub fn load_depth_map(path: &Path, units: DepthUnits) -> Result<Grid2<f64>, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => {
            let mut map = read_pfm(path)?;
            if units == DepthUnits::Meters {
                for v in map.data_mut() {
                    *v = if *v > 0.0 { 1.0 / *v } else { 0.0 };
                }
            }
            Ok(map)
        }
        Some("png") => {
            let sidecar_path = path.with_extension("json");
            let text = std::fs::read_to_string(&sidecar_path).map_err(|_| {
                IoError::Format(format!(
                    "{}: 16-bit PNG depth maps need a sidecar {}",
                    path.display(),
                    sidecar_path.display()
                ))
            })?;
            let sidecar: DepthSidecar = serde_json::from_str(&text)?;
            let raw = read_gray_png(path)?;
            Ok(raw.map(|&v| {
                sidecar.min_diopters + v * (sidecar.max_diopters - sidecar.min_diopters)
            }))
        }
        _ => Err(IoError::Format(format!(
            "{}: depth maps must be .png (+ .json sidecar) or .pfm",
            path.display()
        ))),
    }
}

/// Affine remap of a depth map's observed range onto a target range, for
/// content with an arbitrary depth scale.
pub fn remap_depth_range(map: &Grid2<f64>, target_min: f64, target_max: f64) -> Grid2<f64> {
    let lo = map.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = map.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return map.map(|_| (target_min + target_max) / 2.0);
    }
    map.map(|&v| target_min + (v - lo) / (hi - lo) * (target_max - target_min))
}

// ---------------------------------------------------------------------------
// Backlight sequence directories

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    pub schedule: SubframeSchedule,
    pub table_id: String,
    pub hdr: bool,
    pub display_image: String,
    pub masks: Vec<String>,
}

/// Writes `display.png`, `mask_000.png` .. `mask_NNN.png`, and
/// `manifest.json` into `dir` (created if needed).
pub fn write_sequence(dir: &Path, seq: &BacklightSequence) -> Result<SequenceManifest, IoError> {
    std::fs::create_dir_all(dir).map_err(file_err(dir))?;
    write_color_png(&dir.join("display.png"), &seq.display_image)?;
    let mut mask_names = Vec::with_capacity(seq.masks.len());
    for (k, mask) in seq.masks.iter().enumerate() {
        let name = format!("mask_{k:03}.png");
        write_mask_png(&dir.join(&name), mask)?;
        mask_names.push(name);
    }
    let manifest = SequenceManifest {
        version: 1,
        width: seq.width(),
        height: seq.height(),
        schedule: seq.schedule.clone(),
        table_id: seq.table_id.clone(),
        hdr: seq.hdr,
        display_image: "display.png".to_string(),
        masks: mask_names,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("manifest.json"), json + "\n").map_err(file_err(dir))?;
    Ok(manifest)
}

pub fn read_sequence(dir: &Path) -> Result<BacklightSequence, IoError> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(file_err(&manifest_path))?;
    let manifest: SequenceManifest = serde_json::from_str(&text)?;
    if manifest.version != 1 {
        return Err(IoError::Manifest(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    if manifest.masks.len() != manifest.schedule.subframes_per_cycle() {
        return Err(IoError::Manifest(format!(
            "manifest lists {} masks but the schedule has {} subframes",
            manifest.masks.len(),
            manifest.schedule.subframes_per_cycle()
        )));
    }
    let display_image = read_color_png(&dir.join(&manifest.display_image))?;
    let mut masks = Vec::with_capacity(manifest.masks.len());
    for name in &manifest.masks {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(IoError::Manifest(format!("missing mask file {name}")));
        }
        let mask = read_mask_png(&path)?;
        if mask.width() != manifest.width || mask.height() != manifest.height {
            return Err(IoError::Manifest(format!("mask {name} has wrong dimensions")));
        }
        masks.push(mask);
    }
    if display_image.width() != manifest.width || display_image.height() != manifest.height {
        return Err(IoError::Manifest("display image has wrong dimensions".into()));
    }
    Ok(BacklightSequence {
        masks,
        display_image,
        schedule: manifest.schedule,
        table_id: manifest.table_id,
        hdr: manifest.hdr,
    })
}

// ---------------------------------------------------------------------------
// Contrast maps and focal stacks

/// 16-bit grayscale PNG of a contrast map. Rows are target depths, columns
/// accommodation depths. Signed error maps are written as 0.5 + value/2.
pub fn write_contrast_png(path: &Path, map: &ContrastMap, signed: bool) -> Result<(), IoError> {
    let img = if signed {
        map.values.map(|&v| 0.5 + v / 2.0)
    } else {
        map.values.clone()
    };
    write_gray16_png(path, &img)
}

/// CSV rows: target_depth_diopters, accommodation_depth_diopters, value.
pub fn write_contrast_csv(path: &Path, map: &ContrastMap) -> Result<(), IoError> {
    let mut out = String::from("target_depth_diopters,accommodation_depth_diopters,value\n");
    for (t, &zd) in map.target_depths.iter().enumerate() {
        for (i, &zs) in map.accommodation_depths.iter().enumerate() {
            out.push_str(&format!("{zd},{zs},{}\n", map.value(t, i)));
        }
    }
    std::fs::write(path, out).map_err(file_err(path))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FocalStackManifest {
    pub depths: Vec<f64>,
    pub images: Vec<String>,
    pub sequence_id: String,
    pub optics_id: String,
}

/// Writes `focus_000.png` .. plus `stack.json` into `dir`.
pub fn write_focal_stack(dir: &Path, stack: &FocalStack) -> Result<FocalStackManifest, IoError> {
    std::fs::create_dir_all(dir).map_err(file_err(dir))?;
    let mut images = Vec::new();
    for (k, (_, image)) in stack.entries.iter().enumerate() {
        let name = format!("focus_{k:03}.png");
        write_color_png(&dir.join(&name), image)?;
        images.push(name);
    }
    let manifest = FocalStackManifest {
        depths: stack.entries.iter().map(|(z, _)| *z).collect(),
        images,
        sequence_id: stack.sequence_id.clone(),
        optics_id: stack.optics_id.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join("stack.json"), json + "\n").map_err(file_err(dir))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Zernike presets

/// Plain-text table of `index waves` pairs; `#` starts a comment.
pub fn read_zernike_preset(path: &Path) -> Result<Vec<(usize, f64)>, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let idx = parts.next().and_then(|s| s.parse::<usize>().ok());
        let val = parts.next().and_then(|s| s.parse::<f64>().ok());
        match (idx, val, parts.next()) {
            (Some(i), Some(v), None) => out.push((i, v)),
            _ => {
                return Err(IoError::Format(format!(
                    "{}:{}: expected \"index waves\"",
                    path.display(),
                    line_no + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Lists the artifact paths a command produced, for the JSON summary line.
pub fn existing_paths(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .filter(|p| p.exists())
        .map(|p| p.display().to_string())
        .collect()
}
