//! Plain-text matrices (CSV, one row per line, no header) and grayscale PGM
//! images.
//!
//! Floats are written in Rust's shortest round-trip form, so a matrix read
//! back is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_matrix_csv(m)).map_err(|e| Error::io(path, e))
}

/// Blank lines are skipped; every other line must have the same number of fields.
pub fn parse_matrix_csv(text: &str, origin: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                field.parse::<f64>().map_err(|_| {
                    Error::parse(origin, format!("line {}: `{field}` is not a number", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    origin,
                    format!("line {}: expected {} fields, found {}", lineno + 1, first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(&text, path)
}

/// Grayscale image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub max_value: u16,
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, max_value: u16, pixels: Vec<u16>) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}×{cols} image needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        if max_value == 0 || pixels.iter().any(|&p| p > max_value) {
            return Err(Error::Invalid(format!("pixel values must lie in 0..={max_value}")));
        }
        Ok(Self { rows, cols, max_value, pixels })
    }

    /// 8-bit image from real intensities, rounded and clamped to 0..=255.
    pub fn from_intensities(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        let pixels = values.iter().map(|v| v.round().clamp(0.0, 255.0) as u16).collect();
        Self::new(rows, cols, 255, pixels)
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }
}

/// Binary `P5` output; 16-bit big-endian samples when `max_value > 255`.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.cols, img.rows, img.max_value).into_bytes();
    if img.max_value > 255 {
        out.extend(img.pixels.iter().flat_map(|p| p.to_be_bytes()));
    } else {
        out.extend(img.pixels.iter().map(|&p| p as u8));
    }
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok().filter(|t| !t.is_empty())
    }

    fn number(&mut self, origin: &Path, what: &str) -> Result<usize> {
        self.token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(origin, format!("missing or malformed {what}")))
    }
}

/// Accepts binary `P5` and plain `P2`.
pub fn decode_pgm(bytes: &[u8], origin: &Path) -> Result<GrayImage> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let magic = cur.token().map(str::to_owned);
    let cols = cur.number(origin, "width")?;
    let rows = cur.number(origin, "height")?;
    let max_value = cur.number(origin, "maximum value")?;
    if max_value == 0 || max_value > 65535 {
        return Err(Error::parse(origin, format!("maximum value {max_value} out of range")));
    }
    let count = rows * cols;
    let pixels: Vec<u16> = match magic.as_deref() {
        Some("P5") => {
            // Exactly one whitespace byte separates the header from the raster.
            let start = cur.pos + 1;
            let width = if max_value > 255 { 2 } else { 1 };
            let raster = bytes
                .get(start..start + count * width)
                .ok_or_else(|| Error::parse(origin, "raster is shorter than width × height"))?;
            if width == 2 {
                raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
            } else {
                raster.iter().map(|&b| u16::from(b)).collect()
            }
        }
        Some("P2") => (0..count)
            .map(|i| {
                cur.token()
                    .and_then(|t| t.parse::<u16>().ok())
                    .ok_or_else(|| Error::parse(origin, format!("pixel {i} missing or malformed")))
            })
            .collect::<Result<_>>()?,
        other => {
            return Err(Error::parse(origin, format!("unsupported image type {:?}", other.unwrap_or(""))))
        }
    };
    GrayImage::new(rows, cols, max_value as u16, pixels).map_err(|e| Error::parse(origin, e.to_string()))
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, path)
}
