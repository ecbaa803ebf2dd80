//! Netpbm codecs (binary PPM `P6`, binary PGM `P5`) and the 16-bit label
//! sidecar format.
//!
//! Label sidecar layout, all integers big-endian:
//!
//! | offset | size      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 8         | magic `COCALBL1`                        |
//! | 8      | 4         | height (u32)                            |
//! | 12     | 4         | width (u32)                             |
//! | 16     | 2         | background id count `b` (u16)           |
//! | 18     | 2 * b     | background ids (u16 each)               |
//! | 18+2b  | 2 * h * w | labels, row-major (u16 each)            |

use std::io::Write;
use std::path::Path;

use crate::error::{CocaError, Result};
use crate::image::Image;

pub const LABEL_MAGIC: &[u8; 8] = b"COCALBL1";

fn format_err(path: &Path, reason: impl Into<String>) -> CocaError {
    CocaError::Format { path: path.to_path_buf(), reason: reason.into() }
}

/// Reads the whitespace/comment separated header tokens of a Netpbm file.
/// Returns the tokens and the offset of the first raster byte.
fn read_header(bytes: &[u8], count: usize) -> Option<(Vec<&[u8]>, usize)> {
    let mut tokens = Vec::with_capacity(count);
    let mut i = 0;
    while tokens.len() < count {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
            i += 1;
        }
        if start == i {
            return None;
        }
        tokens.push(&bytes[start..i]);
    }
    // Exactly one whitespace byte separates the header from the raster.
    if i >= bytes.len() || !bytes[i].is_ascii_whitespace() {
        return None;
    }
    Some((tokens, i + 1))
}

fn parse_usize(tok: &[u8]) -> Option<usize> {
    std::str::from_utf8(tok).ok()?.parse().ok()
}

/// Decodes a binary PPM (`P6`) with 8- or 16-bit samples.
pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<Image> {
    let (tokens, start) = read_header(bytes, 4).ok_or_else(|| format_err(path, "truncated header"))?;
    if tokens[0] != b"P6" {
        return Err(format_err(path, "not a binary PPM (P6)"));
    }
    let width = parse_usize(tokens[1]).ok_or_else(|| format_err(path, "bad width"))?;
    let height = parse_usize(tokens[2]).ok_or_else(|| format_err(path, "bad height"))?;
    let maxval = parse_usize(tokens[3]).ok_or_else(|| format_err(path, "bad maxval"))?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(format_err(path, "invalid dimensions or maxval"));
    }
    let samples = width * height * 3;
    let raster = &bytes[start..];
    let scale = maxval as f64;
    let data: Vec<f64> = if maxval < 256 {
        if raster.len() < samples {
            return Err(format_err(path, "truncated raster"));
        }
        raster[..samples].iter().map(|&v| (v as f64 / scale).min(1.0)).collect()
    } else {
        if raster.len() < samples * 2 {
            return Err(format_err(path, "truncated raster"));
        }
        raster[..samples * 2]
            .chunks_exact(2)
            .map(|c| (u16::from_be_bytes([c[0], c[1]]) as f64 / scale).min(1.0))
            .collect()
    };
    Ok(Image { height, width, data })
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| CocaError::io(path, e))?;
    decode_ppm(&bytes, path)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| to_u8(v)));
    out
}

pub fn write_ppm(img: &Image, path: &Path) -> Result<()> {
    write_bytes(path, &encode_ppm(img))
}

/// Encodes an 8-bit grayscale raster as binary PGM (`P5`).
pub fn encode_pgm(height: usize, width: usize, gray: &[u8]) -> Vec<u8> {
    assert_eq!(gray.len(), height * width);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(gray);
    out
}

pub fn write_pgm(height: usize, width: usize, gray: &[u8], path: &Path) -> Result<()> {
    write_bytes(path, &encode_pgm(height, width, gray))
}

/// Writes values in `[0, 1]` as an 8-bit PGM.
pub fn write_pgm_unit(height: usize, width: usize, values: &[f64], path: &Path) -> Result<()> {
    let gray: Vec<u8> = values.iter().map(|&v| to_u8(v)).collect();
    write_pgm(height, width, &gray, path)
}

/// Decodes an 8-bit binary PGM; returns `(height, width, raster)`.
pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let (tokens, start) = read_header(bytes, 4).ok_or_else(|| format_err(path, "truncated header"))?;
    if tokens[0] != b"P5" {
        return Err(format_err(path, "not a binary PGM (P5)"));
    }
    let width = parse_usize(tokens[1]).ok_or_else(|| format_err(path, "bad width"))?;
    let height = parse_usize(tokens[2]).ok_or_else(|| format_err(path, "bad height"))?;
    if parse_usize(tokens[3]) != Some(255) {
        return Err(format_err(path, "only 8-bit PGM is supported"));
    }
    let raster = bytes.get(start..start + width * height).ok_or_else(|| format_err(path, "truncated raster"))?;
    Ok((height, width, raster.to_vec()))
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| CocaError::io(path, e))?;
    decode_pgm(&bytes, path)
}

/// A label raster as stored in a sidecar file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelFile {
    pub height: usize,
    pub width: usize,
    pub background: Vec<u16>,
    pub labels: Vec<u16>,
}

pub fn encode_labels(file: &LabelFile) -> Vec<u8> {
    assert_eq!(file.labels.len(), file.height * file.width);
    let mut out = Vec::with_capacity(18 + 2 * (file.background.len() + file.labels.len()));
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&(file.height as u32).to_be_bytes());
    out.extend_from_slice(&(file.width as u32).to_be_bytes());
    out.extend_from_slice(&(file.background.len() as u16).to_be_bytes());
    for &b in &file.background {
        out.extend_from_slice(&b.to_be_bytes());
    }
    for &l in &file.labels {
        out.extend_from_slice(&l.to_be_bytes());
    }
    out
}

pub fn decode_labels(bytes: &[u8], path: &Path) -> Result<LabelFile> {
    if bytes.len() < 18 || &bytes[..8] != LABEL_MAGIC {
        return Err(format_err(path, "missing COCALBL1 header"));
    }
    let u32_at = |o: usize| u32::from_be_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize;
    let u16_at = |o: usize| u16::from_be_bytes([bytes[o], bytes[o + 1]]);
    let height = u32_at(8);
    let width = u32_at(12);
    let bg_count = u16_at(16) as usize;
    let label_start = 18 + 2 * bg_count;
    let expected = label_start + 2 * height * width;
    if height == 0 || width == 0 || bytes.len() != expected {
        return Err(format_err(path, format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let background = (0..bg_count).map(|i| u16_at(18 + 2 * i)).collect();
    let labels = (0..height * width).map(|i| u16_at(label_start + 2 * i)).collect();
    Ok(LabelFile { height, width, background, labels })
}

pub fn write_labels(file: &LabelFile, path: &Path) -> Result<()> {
    write_bytes(path, &encode_labels(file))
}

pub fn read_labels(path: &Path) -> Result<LabelFile> {
    let bytes = std::fs::read(path).map_err(|e| CocaError::io(path, e))?;
    decode_labels(&bytes, path)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| CocaError::io(path, e))?);
    f.write_all(bytes).and_then(|_| f.flush()).map_err(|e| CocaError::io(path, e))
}
