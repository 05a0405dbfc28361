//! Binary greyscale PGM (`P5`) reading and writing.

use std::path::Path;

use crate::error::{Error, Result};

/// Single-channel image with pixels in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!("image size {height}×{width} has a zero side")));
        }
        if pixels.len() != height * width {
            return Err(Error::dim(format!(
                "{height}×{width} image needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
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
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::PgmHeader(format!("missing {what}")));
        }
        let digits = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        digits
            .parse::<usize>()
            .map_err(|_| Error::PgmHeader(format!("{what} {digits} overflows")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(Error::PgmBadMagic(bytes.iter().take(2).copied().collect()));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::PgmHeader(format!("zero image size {width}×{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::PgmHeader(format!("maxval {maxval} outside 1..=65535")));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(Error::PgmHeader("no whitespace after maxval".into())),
    }
    let bytes_per = if maxval < 256 { 1 } else { 2 };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(bytes_per))
        .ok_or_else(|| Error::PgmHeader(format!("image size {width}×{height} overflows")))?;
    let payload = &bytes[h.pos..];
    if payload.len() < expected {
        return Err(Error::PgmTruncated {
            expected,
            found: payload.len(),
        });
    }
    let scale = maxval as f64;
    let pixels = if bytes_per == 1 {
        payload[..expected].iter().map(|&b| (b as f64 / scale).min(1.0)).collect()
    } else {
        payload[..expected]
            .chunks_exact(2)
            .map(|p| (u16::from_be_bytes([p[0], p[1]]) as f64 / scale).min(1.0))
            .collect()
    };
    Image::new(height, width, pixels)
}

/// Encode as 8-bit `P5`, rounding each pixel to the nearest of 256 levels.
pub fn write_pgm(image: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend(image.pixels.iter().map(|&p| (p * 255.0).round() as u8));
    out
}

pub fn load_pgm(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::ImageLoad {
        path: path.to_path_buf(),
        source: Box::new(e.into()),
    })?;
    parse_pgm(&bytes).map_err(|e| Error::ImageLoad {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

pub fn save_pgm(image: &Image, path: &Path) -> Result<()> {
    std::fs::write(path, write_pgm(image))?;
    Ok(())
}
