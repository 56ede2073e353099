//! Binary PPM (`P6`, maxval 255) reader and writer.

use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("image has no pixels"));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::param(format!(
                "{}x{} image needs {} bytes, got {}",
                width,
                height,
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.pixels.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Ppm {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Skips whitespace and `#` comments between header tokens.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while self.data.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_separators();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(match self.data.get(self.pos) {
                None => self.err(format!("unexpected end of header, expected {what}")),
                Some(b) => self.err(format!("expected {what}, found byte 0x{b:02x}")),
            });
        }
        let digits = std::str::from_utf8(&self.data[start..self.pos]).unwrap_or_default();
        digits.parse().map_err(|_| Error::Ppm {
            offset: start,
            message: format!("{what} {digits} is too large"),
        })
    }
}

/// Parses a complete binary PPM. Trailing bytes after the raster are ignored.
pub fn parse_ppm(data: &[u8]) -> Result<RgbImage> {
    let mut c = Cursor { data, pos: 0 };
    if !data.starts_with(b"P6") {
        return Err(c.err("missing P6 magic number"));
    }
    c.pos = 2;
    if !data.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(c.err("magic number must be followed by whitespace"));
    }
    let width = c.number("width")?;
    let height = c.number("height")?;
    c.skip_separators();
    let maxval_at = c.pos;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Ppm {
            offset: maxval_at,
            message: format!("image has zero pixels ({width}x{height})"),
        });
    }
    if maxval != 255 {
        return Err(Error::Ppm {
            offset: maxval_at,
            message: format!("unsupported maxval {maxval}, only 255 is accepted"),
        });
    }
    match data.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        Some(_) => return Err(c.err("maxval must be followed by a single whitespace byte")),
        None => return Err(c.err("unexpected end of file before pixel data")),
    }
    let needed = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(3))
        .ok_or_else(|| c.err("image dimensions overflow"))?;
    let available = data.len() - c.pos;
    if available < needed {
        return Err(Error::Ppm {
            offset: data.len(),
            message: format!("truncated pixel data: expected {needed} bytes, found {available}"),
        });
    }
    RgbImage::new(width, height, data[c.pos..c.pos + needed].to_vec())
}

pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path)?;
    parse_ppm(&bytes).map_err(|e| match e {
        Error::Ppm { offset, message } => Error::Ppm {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}
