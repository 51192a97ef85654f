//! Grayscale rasters and binary PGM (P5) input/output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::geometry::{Homography, Rect};

/// An 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != (width as usize) * (height as usize) {
            return Err(Error::InvalidArgument(format!(
                "raster of {}x{} needs {} pixels, got {}",
                width,
                height,
                (width as usize) * (height as usize),
                pixels.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Raster {
            width,
            height,
            pixels: vec![value; (width as usize) * (height as usize)],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = v;
    }

    /// Nearest-neighbor sample at a real-valued position; `None` outside.
    pub fn sample_nearest(&self, p: Point2<f64>) -> Option<u8> {
        let x = p.x.round();
        let y = p.y.round();
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        Some(self.get(x as u32, y as u32))
    }

    /// Warp into the same-size plane through `h` (inverse nearest-neighbor
    /// mapping). Unset pixels report `None` so callers can composite.
    pub fn warp_nearest(&self, h: &Homography) -> Vec<Option<u8>> {
        let inv = h.inverse();
        let mut out = vec![None; self.pixels.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let src = inv.apply(Point2::new(x as f64, y as f64));
                if src.x.is_finite() && src.y.is_finite() {
                    out[y as usize * self.width as usize + x as usize] = self.sample_nearest(src);
                }
            }
        }
        out
    }

    pub fn crop(&self, rect: &Rect) -> Raster {
        let x0 = rect.x0.round().max(0.0) as u32;
        let y0 = rect.y0.round().max(0.0) as u32;
        let x1 = (rect.x1.round() as u32).min(self.width);
        let y1 = (rect.y1.round() as u32).min(self.height);
        let (w, h) = (x1.saturating_sub(x0), y1.saturating_sub(y0));
        let mut pixels = Vec::with_capacity((w as usize) * (h as usize));
        for y in y0..y1 {
            for x in x0..x1 {
                pixels.push(self.get(x, y));
            }
        }
        Raster {
            width: w,
            height: h,
            pixels,
        }
    }
}

/// Writes an 8-bit binary PGM with a fixed-layout header, so identical
/// rasters produce identical bytes.
pub fn write_pgm(path: &Path, raster: &Raster) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "P5\n{} {}\n255\n", raster.width, raster.height)?;
    w.write_all(&raster.pixels)?;
    w.flush()?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<Raster> {
    let data = fs::read(path)?;
    let fmt = |msg: &str| Error::Format {
        path: path.display().to_string(),
        line: 1,
        message: msg.to_string(),
    };
    if data.len() < 2 || &data[0..2] != b"P5" {
        return Err(fmt("not a binary PGM (missing P5 magic)"));
    }
    // Header: magic, width, height, maxval as whitespace-separated tokens,
    // with optional '#' comment lines.
    let mut pos = 2;
    let mut fields = Vec::with_capacity(3);
    while fields.len() < 3 && pos < data.len() {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            break;
        }
        let token = std::str::from_utf8(&data[start..pos])
            .map_err(|_| fmt("non-ascii header token"))?;
        fields.push(
            token
                .parse::<u32>()
                .map_err(|_| fmt("non-numeric header token"))?,
        );
    }
    if fields.len() != 3 {
        return Err(fmt("truncated PGM header"));
    }
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(fmt("only maxval 255 is supported"));
    }
    pos += 1; // single whitespace after maxval
    let expected = (width as usize) * (height as usize);
    if data.len() < pos + expected {
        return Err(fmt("pixel payload shorter than width * height"));
    }
    Raster::new(width, height, data[pos..pos + expected].to_vec())
}
