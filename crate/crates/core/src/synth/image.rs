use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const RENDER_WIDTH: usize = 256;
pub const RENDER_HEIGHT: usize = 192;
pub const INPUT_SIZE: usize = 220;
pub const BACKGROUND: u8 = 255;

/// 8-bit grayscale raster, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Binary PGM (`P5`).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Validation(format!("PGM: {m}"));
        // Header: magic, width, height, maxval separated by whitespace; one
        // whitespace byte precedes the raster. Comments are not supported.
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
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
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header encoding"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("only binary P5 is supported"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad("header number"));
        let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if maxval != 255 {
            return Err(bad("maxval must be 255"));
        }
        let raster = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?;
        if raster.len() != width * height {
            return Err(bad("raster size does not match header"));
        }
        Ok(Self {
            width,
            height,
            pixels: raster.to_vec(),
        })
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }

    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_pgm(&bytes)
    }
}

/// Scales the image to fit `INPUT_SIZE` on its longer side with bilinear
/// filtering and centers it on a white square canvas.
pub fn resize_to_input(image: &GrayImage) -> GrayImage {
    let scale = INPUT_SIZE as f64 / image.width.max(image.height) as f64;
    let w = ((image.width as f64 * scale).round() as usize).clamp(1, INPUT_SIZE);
    let h = ((image.height as f64 * scale).round() as usize).clamp(1, INPUT_SIZE);
    let (ox, oy) = ((INPUT_SIZE - w) / 2, (INPUT_SIZE - h) / 2);
    let mut out = GrayImage::filled(INPUT_SIZE, INPUT_SIZE, BACKGROUND);
    let sample = |x: usize, y: usize| image.get(x, y) as f64;
    for y in 0..h {
        let sy = ((y as f64 + 0.5) / scale - 0.5).clamp(0.0, (image.height - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(image.height - 1);
        let fy = sy - y0 as f64;
        for x in 0..w {
            let sx = ((x as f64 + 0.5) / scale - 0.5).clamp(0.0, (image.width - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(image.width - 1);
            let fx = sx - x0 as f64;
            let top = sample(x0, y0) * (1.0 - fx) + sample(x1, y0) * fx;
            let bottom = sample(x0, y1) * (1.0 - fx) + sample(x1, y1) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.set(ox + x, oy + y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Maps pixels to `[-1, 1]` as `p / 127.5 − 1`; white becomes exactly 1.
pub fn to_network_input(image: &GrayImage) -> Vec<f64> {
    image.pixels.iter().map(|&p| p as f64 / 127.5 - 1.0).collect()
}

/// Letterboxed, normalized network input for a rendered view.
pub fn prepare_input(image: &GrayImage) -> Vec<f64> {
    if image.width == INPUT_SIZE && image.height == INPUT_SIZE {
        to_network_input(image)
    } else {
        to_network_input(&resize_to_input(image))
    }
}
