//! Binary file formats for grids.
//!
//! Depth, mask and raw-real image files share a 13-byte header:
//! 4 magic bytes, a version byte (`0x01`), then width and height as
//! little-endian `u32`. Payloads are row-major; reals are little-endian
//! IEEE-754 `f32`. 8-bit images use the binary portable pixmap (`P6`) form.

use std::fs;
use std::path::Path;

use super::{is_hole, BinMask, DepthMap, RgbImage, HOLE};
use crate::error::{Error, Result};

const DEPTH_MAGIC: &[u8; 4] = b"DMAP";
const MASK_MAGIC: &[u8; 4] = b"MSK1";
const IMAGE_MAGIC: &[u8; 4] = b"IMGF";
const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 13;

/// Canonical quiet-NaN pattern written for depth holes.
pub const QUIET_NAN_BITS: u32 = 0x7FC0_0000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    /// 8-bit binary portable pixmap.
    Ppm,
    /// `IMGF` header followed by three `f32` per pixel.
    Raw,
}

impl ImageFormat {
    /// Picks a format from a file extension (`ppm` or anything else → raw).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ppm") => ImageFormat::Ppm,
            _ => ImageFormat::Raw,
        }
    }
}

fn header(magic: &[u8; 4], width: usize, height: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(magic);
    out.push(VERSION);
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out
}

/// Parses the shared header and checks the payload length.
/// Returns `(width, height, payload)`.
fn parse_header<'a>(bytes: &'a [u8], magic: &[u8; 4], bytes_per_cell: usize) -> Result<(usize, usize, &'a [u8])> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(format!("file too short for header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != magic {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    if bytes[4] != VERSION {
        return Err(Error::format(format!("unsupported version {}", bytes[4])));
    }
    let width = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    if width == 0 || height == 0 {
        return Err(Error::format(format!("zero dimension {width}x{height}")));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bytes_per_cell))
        .ok_or_else(|| Error::format("dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < expected {
        return Err(Error::format(format!("truncated payload: expected {expected} bytes, found {}", payload.len())));
    }
    if payload.len() > expected {
        return Err(Error::format(format!(
            "trailing data: expected {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    Ok((width, height, payload))
}

fn f32_cells(payload: &[u8]) -> impl Iterator<Item = f32> + '_ {
    payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()))
}

pub fn encode_depth(map: &DepthMap) -> Result<Vec<u8>> {
    let mut out = header(DEPTH_MAGIC, map.width(), map.height());
    out.reserve(map.len() * 4);
    for (i, &v) in map.cells().iter().enumerate() {
        let bits = if is_hole(v) {
            QUIET_NAN_BITS
        } else {
            let single = v as f32;
            if !(single.is_finite() && single > 0.0) {
                return Err(Error::invalid(format!("depth cell {i} ({v}) is not representable as a positive f32")));
            }
            single.to_bits()
        };
        out.extend_from_slice(&bits.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_depth(bytes: &[u8]) -> Result<DepthMap> {
    let (width, height, payload) = parse_header(bytes, DEPTH_MAGIC, 4)?;
    let cells = f32_cells(payload).map(|v| if v.is_nan() { HOLE } else { v as f64 }).collect();
    DepthMap::new(width, height, cells).map_err(|e| Error::format(e.to_string()))
}

pub fn write_depth(map: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_depth(map)?)?;
    Ok(())
}

pub fn read_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    decode_depth(&fs::read(path)?)
}

pub fn encode_mask(mask: &BinMask) -> Vec<u8> {
    let mut out = header(MASK_MAGIC, mask.width(), mask.height());
    out.extend(mask.cells().iter().map(|&c| c as u8));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<BinMask> {
    let (width, height, payload) = parse_header(bytes, MASK_MAGIC, 1)?;
    let cells = payload
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::format(format!("mask cell value {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    BinMask::new(width, height, cells)
}

pub fn write_mask(mask: &BinMask, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_mask(mask))?;
    Ok(())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinMask> {
    decode_mask(&fs::read(path)?)
}

pub fn encode_image_raw(img: &RgbImage) -> Vec<u8> {
    let mut out = header(IMAGE_MAGIC, img.width(), img.height());
    out.reserve(img.pixels().len() * 12);
    for p in img.pixels() {
        for &c in p {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    out
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn encode_image_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.pixels().len() * 3);
    for p in img.pixels() {
        out.extend(p.iter().map(|&c| quantize(c)));
    }
    out
}

fn decode_ppm(bytes: &[u8]) -> Result<RgbImage> {
    // Header: "P6", width, height, maxval, separated by whitespace with
    // optional '#' comments, then exactly one whitespace byte.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::format("truncated pixmap header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("malformed pixmap header"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format(format!("unsupported pixmap maxval {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::format(format!("zero dimension {width}x{height}")));
    }
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::format("malformed pixmap header"));
    }
    let payload = &bytes[pos + 1..];
    if payload.len() != width * height * 3 {
        return Err(Error::format(format!(
            "pixmap payload has {} bytes, expected {}",
            payload.len(),
            width * height * 3
        )));
    }
    let pixels = payload.chunks_exact(3).map(|c| [c[0], c[1], c[2]].map(|b| b as f64 / 255.0)).collect();
    RgbImage::new(width, height, pixels)
}

/// Decodes either image format, detected from the leading magic bytes.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.starts_with(b"P6") {
        return decode_ppm(bytes);
    }
    let (width, height, payload) = parse_header(bytes, IMAGE_MAGIC, 12)?;
    let vals: Vec<f64> = f32_cells(payload).map(|v| v as f64).collect();
    let pixels = vals.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    RgbImage::new(width, height, pixels)
}

pub fn write_image(img: &RgbImage, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let bytes = match format {
        ImageFormat::Ppm => encode_image_ppm(img),
        ImageFormat::Raw => encode_image_raw(img),
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode_image(&fs::read(path)?)
}
