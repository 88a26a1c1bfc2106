//! PGM and CSV image readers, a PGM writer, and the `labels.csv` convention.

use std::fs;
use std::path::{Path, PathBuf};

use super::GrayImage;
use crate::error::{Error, Result};

/// On-disk image encodings understood by [`load_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Csv,
}

impl ImageFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pgm" => Some(ImageFormat::Pgm),
            "csv" => Some(ImageFormat::Csv),
            _ => None,
        }
    }
}

/// Loads an image and rescales intensities into `[0, 1]`.
///
/// PGM intensities are divided by the header's maxval; CSV matrices by their
/// largest absolute value (an all-zero matrix stays zero).
pub fn load_image(path: &Path, format: ImageFormat) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        ImageFormat::Pgm => parse_pgm(&bytes, path),
        ImageFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|_| Error::parse(path, 1, "not valid UTF-8"))?;
            parse_csv_matrix(&text, path)
        }
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Header<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'\n' => {
                    self.line += 1;
                    self.pos += 1;
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, path: &Path, what: &str) -> Result<usize> {
        let line = self.line;
        let tok = self
            .token()
            .ok_or_else(|| Error::parse(path, line, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::parse(path, self.line, format!("malformed {what}")))
    }
}

fn parse_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut h = Header { bytes, pos: 0, line: 1 };
    let binary = match h.token() {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(Error::parse(path, 1, "malformed header: expected P2 or P5 magic")),
    };
    let width = h.number(path, "width")?;
    let height = h.number(path, "height")?;
    let maxval = h.number(path, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(path, h.line, "malformed header: zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(path, h.line, format!("malformed header: maxval {maxval}")));
    }
    let n = width * height;
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates maxval from the raster.
        let start = h.pos + 1;
        let per = if maxval < 256 { 1 } else { 2 };
        let raster = bytes.get(start..start + n * per).ok_or_else(|| {
            Error::parse(path, h.line, format!("truncated raster: expected {} bytes", n * per))
        })?;
        if per == 1 {
            data.extend(raster.iter().map(|&b| b as f64 * scale));
        } else {
            data.extend(
                raster
                    .chunks_exact(2)
                    .map(|p| u16::from_be_bytes([p[0], p[1]]) as f64 * scale),
            );
        }
    } else {
        for _ in 0..n {
            let v = h.number(path, "pixel value")?;
            if v > maxval {
                return Err(Error::parse(path, h.line, format!("pixel {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 * scale);
        }
    }
    GrayImage::new(width, height, data).map_err(|e| Error::parse(path, h.line, e.to_string()))
}

/// Parses a rectangular comma-separated matrix of reals.
pub fn parse_csv_matrix(text: &str, path: &Path) -> Result<GrayImage> {
    let mut width = None;
    let mut data = Vec::new();
    let mut height = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut count = 0;
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("not a number: {:?}", field.trim())))?;
            if !v.is_finite() {
                return Err(Error::parse(path, line_no, "non-finite value"));
            }
            data.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(Error::parse(path, line_no, format!("ragged row at line {line_no}")));
            }
            _ => {}
        }
        height += 1;
    }
    let width = width.ok_or_else(|| Error::parse(path, 1, "empty matrix"))?;
    let max_abs = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs > 0.0 {
        data.iter_mut().for_each(|v| *v /= max_abs);
    }
    GrayImage::new(width, height, data)
}

/// Writes a 16-bit binary PGM. Intensities are clamped to `[0, 1]`.
pub fn write_pgm16(img: &GrayImage, path: &Path) -> Result<()> {
    let mut out = format!("P5\n{} {}\n65535\n", img.width(), img.height()).into_bytes();
    out.reserve(img.data().len() * 2);
    for &v in img.data() {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One `filename,label` record of `labels.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelEntry {
    pub filename: String,
    pub label: String,
}

pub const LABELS_FILE: &str = "labels.csv";

pub fn read_labels(path: &Path) -> Result<Vec<LabelEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "filename,label" => {}
        _ => return Err(Error::parse(path, 1, "expected header `filename,label`")),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (name, label) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, idx + 1, "expected `filename,label`"))?;
        out.push(LabelEntry {
            filename: name.trim().to_string(),
            label: label.trim().to_string(),
        });
    }
    Ok(out)
}

pub fn write_labels(entries: &[LabelEntry], path: &Path) -> Result<()> {
    let mut s = String::from("filename,label\n");
    for e in entries {
        s.push_str(&e.filename);
        s.push(',');
        s.push_str(&e.label);
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub(crate) fn image_path(dir: &Path, filename: &str) -> PathBuf {
    dir.join(filename)
}
