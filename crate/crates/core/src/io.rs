//! Image files.
//!
//! Two self-describing formats:
//!
//! * `f32-raw`: one JSON header line `{"side":n,"dtype":"f32le"}`, a newline,
//!   then `n²` little-endian `f32` values, row-major. Lossless for values that
//!   are representable in `f32`.
//! * `pgm16`: binary P5 with maxval 65535. Values are affinely mapped from the
//!   image's `[min, max]`; the range is stored in a `# range <min> <max>`
//!   comment so loading restores the original scale.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm16,
    F32Raw,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "pgm" => Some(ImageFormat::Pgm16),
            "f32raw" | "raw" => Some(ImageFormat::F32Raw),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawHeader {
    side: usize,
    dtype: String,
}

pub fn save_image(img: &Image, path: impl AsRef<Path>, format: ImageFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        ImageFormat::F32Raw => encode_f32raw(img),
        ImageFormat::Pgm16 => encode_pgm16(img),
    };
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Loads either format, sniffing the first byte.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    match bytes.first() {
        Some(b'{') => decode_f32raw(bytes),
        Some(b'P') => decode_pgm16(bytes),
        _ => Err(Error::parse("magic", "neither a JSON header nor a P5 signature")),
    }
}

pub fn encode_f32raw(img: &Image) -> Vec<u8> {
    let header = serde_json::to_string(&RawHeader {
        side: img.grid().side(),
        dtype: "f32le".into(),
    })
    .expect("header serializes");
    let mut out = Vec::with_capacity(header.len() + 1 + 4 * img.values().len());
    out.extend_from_slice(header.as_bytes());
    out.push(b'\n');
    for &v in img.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_f32raw(bytes: &[u8]) -> Result<Image> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::parse("header", "missing newline after JSON header"))?;
    let value: serde_json::Value = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| Error::parse("header", e.to_string()))?;
    let side = value
        .get("side")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::parse("side", "missing or not a non-negative integer"))? as usize;
    match value.get("dtype").and_then(|v| v.as_str()) {
        Some("f32le") => {}
        Some(other) => return Err(Error::parse("dtype", format!("unsupported dtype `{other}`"))),
        None => return Err(Error::parse("dtype", "missing")),
    }
    let grid = Grid::new(side).map_err(|e| Error::parse("side", e.to_string()))?;
    let payload = &bytes[nl + 1..];
    if payload.len() != 4 * grid.len() {
        return Err(Error::parse(
            "payload",
            format!("expected {} bytes for side {side}, found {}", 4 * grid.len(), payload.len()),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Image::new(grid, values)
}

pub fn encode_pgm16(img: &Image) -> Vec<u8> {
    let side = img.grid().side();
    let (lo, hi) = img.min_max();
    let span = hi - lo;
    let mut out = format!("P5\n# range {lo:e} {hi:e}\n{side} {side}\n65535\n").into_bytes();
    for &v in img.values() {
        let level = if span > 0.0 {
            ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    out
}

pub fn decode_pgm16(bytes: &[u8]) -> Result<Image> {
    let mut pos = 0usize;
    let mut range: Option<(f64, f64)> = None;
    let mut tokens: Vec<String> = Vec::with_capacity(4);
    // Header: magic, width, height, maxval, separated by whitespace, with
    // comment lines allowed in between.
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(Error::parse(header_field(tokens.len()), "truncated header"));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(bytes.len(), |e| pos + e);
            let line = String::from_utf8_lossy(&bytes[pos + 1..end]);
            let mut parts = line.split_whitespace();
            if parts.next() == Some("range") {
                let lo = parts.next().and_then(|s| s.parse::<f64>().ok());
                let hi = parts.next().and_then(|s| s.parse::<f64>().ok());
                match (lo, hi) {
                    (Some(lo), Some(hi)) if lo.is_finite() && hi.is_finite() && lo <= hi => {
                        range = Some((lo, hi))
                    }
                    _ => return Err(Error::parse("range", format!("malformed range comment `{line}`"))),
                }
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates maxval from the raster
    pos += 1;

    if tokens[0] != "P5" {
        return Err(Error::parse("magic", format!("expected P5, found `{}`", tokens[0])));
    }
    let parse_dim = |idx: usize| -> Result<usize> {
        tokens[idx]
            .parse::<usize>()
            .map_err(|_| Error::parse(header_field(idx), format!("not an integer: `{}`", tokens[idx])))
    };
    let (width, height, maxval) = (parse_dim(1)?, parse_dim(2)?, parse_dim(3)?);
    if width != height {
        return Err(Error::parse("height", format!("image must be square, got {width}x{height}")));
    }
    if maxval != 65535 {
        return Err(Error::parse("maxval", format!("expected 65535, found {maxval}")));
    }
    let grid = Grid::new(width).map_err(|e| Error::parse("width", e.to_string()))?;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() != 2 * grid.len() {
        return Err(Error::parse(
            "payload",
            format!("expected {} bytes, found {}", 2 * grid.len(), payload.len()),
        ));
    }
    let (lo, hi) = range.unwrap_or((0.0, 1.0));
    let values = payload
        .chunks_exact(2)
        .map(|c| lo + (hi - lo) * u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
        .collect();
    Image::new(grid, values)
}

fn header_field(idx: usize) -> &'static str {
    ["magic", "width", "height", "maxval"][idx.min(3)]
}
