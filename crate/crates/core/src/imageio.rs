//! Binary PGM (`P5`) and PPM (`P6`) with maxval 255.
//!
//! Headers may contain `#` comments on read. Writes always use the canonical
//! `P5\n<w> <h>\n255\n` form so that output bytes are reproducible.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::codec::RasterImage;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated data: expected {expected} sample bytes, got {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ImageError {
    pub fn code(&self) -> &'static str {
        match self {
            ImageError::UnsupportedFormat(_) => "unsupported-format",
            ImageError::MalformedHeader(_) => "malformed-header",
            ImageError::TruncatedData { .. } => "truncated-data",
            ImageError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Pgm,
    Ppm,
}

impl Format {
    pub fn of(image: &RasterImage) -> Self {
        if image.channels() == 1 {
            Format::Pgm
        } else {
            Format::Ppm
        }
    }

    /// Detects the format from the leading magic bytes.
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        match bytes.get(..2)? {
            b"P5" => Some(Format::Pgm),
            b"P6" => Some(Format::Ppm),
            _ => None,
        }
    }

    pub fn magic(self) -> &'static str {
        match self {
            Format::Pgm => "P5",
            Format::Ppm => "P6",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Pgm => "pgm",
            Format::Ppm => "ppm",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            Format::Pgm => 1,
            Format::Ppm => 3,
        }
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("missing {what}")));
        }
        // Digits are ASCII, so this cannot fail to be UTF-8.
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or_default();
        text.parse()
            .map_err(|_| ImageError::MalformedHeader(format!("{what} {text:?} out of range")))
    }
}

pub fn read_image(bytes: &[u8]) -> Result<RasterImage, ImageError> {
    let format = match bytes.get(..2) {
        Some(b"P5") => Format::Pgm,
        Some(b"P6") => Format::Ppm,
        Some(m) => {
            return Err(ImageError::UnsupportedFormat(format!(
                "magic {:?}",
                String::from_utf8_lossy(m)
            )))
        }
        None => return Err(ImageError::MalformedHeader("file too short".into())),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if !cur
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(ImageError::MalformedHeader(
            "no separator after magic".into(),
        ));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedFormat(format!("maxval {maxval}")));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(ImageError::MalformedHeader(
                "no separator after maxval".into(),
            ))
        }
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(format.channels()))
        .ok_or_else(|| ImageError::MalformedHeader("dimensions overflow".into()))?;
    let data = &bytes[cur.pos..];
    if data.len() < expected {
        return Err(ImageError::TruncatedData {
            expected,
            actual: data.len(),
        });
    }
    RasterImage::new(width, height, format.channels(), data[..expected].to_vec())
        .map_err(|e| ImageError::MalformedHeader(e.to_string()))
}

pub fn write_image(image: &RasterImage) -> Vec<u8> {
    let header = format!(
        "{}\n{} {}\n255\n",
        Format::of(image).magic(),
        image.width(),
        image.height()
    );
    let mut out = Vec::with_capacity(header.len() + image.samples().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(image.samples());
    out
}

pub fn load(path: impl AsRef<Path>) -> Result<RasterImage, ImageError> {
    read_image(&fs::read(path)?)
}

pub fn save(path: impl AsRef<Path>, image: &RasterImage) -> Result<(), ImageError> {
    fs::write(path, write_image(image))?;
    Ok(())
}
