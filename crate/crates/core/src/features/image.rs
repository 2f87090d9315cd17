use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Side length of every time-frequency image.
pub const IMAGE_SIZE: usize = 100;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Matrix::new(r, c, rows.concat())
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Bilinear interpolation on a corner-aligned grid: output corners coincide
/// with input corners.
pub fn resize_bilinear(m: &Matrix, out_h: usize, out_w: usize) -> Result<Matrix> {
    if m.rows < 2 || m.cols < 2 {
        return Err(Error::InvalidInput(format!(
            "bilinear resize needs at least 2x2 input, got {}x{}",
            m.rows, m.cols
        )));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidInput("resize target must be non-empty".into()));
    }
    if out_h == m.rows && out_w == m.cols {
        return Ok(m.clone());
    }
    let axis = |n_out: usize, n_in: usize| -> Vec<(usize, f64)> {
        (0..n_out)
            .map(|i| {
                let pos = if n_out == 1 {
                    0.0
                } else {
                    i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
                };
                let i0 = (pos.floor() as usize).min(n_in - 2);
                (i0, pos - i0 as f64)
            })
            .collect()
    };
    let ys = axis(out_h, m.rows);
    let xs = axis(out_w, m.cols);
    let mut out = Vec::with_capacity(out_h * out_w);
    for &(y0, fy) in &ys {
        for &(x0, fx) in &xs {
            let top = m.at(y0, x0) * (1.0 - fx) + m.at(y0, x0 + 1) * fx;
            let bot = m.at(y0 + 1, x0) * (1.0 - fx) + m.at(y0 + 1, x0 + 1) * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    Matrix::new(out_h, out_w, out)
}

/// A 100x100 image with pixels in [0, 1]; row 0 is the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Vec<f64>,
}

impl Image {
    pub const SIZE: usize = IMAGE_SIZE;
    pub const LEN: usize = IMAGE_SIZE * IMAGE_SIZE;

    pub fn zeros() -> Self {
        Image {
            pixels: vec![0.0; Self::LEN],
        }
    }

    /// Wrap raw pixels, rejecting wrong sizes and values outside [0, 1].
    pub fn from_pixels(pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != Self::LEN {
            return Err(Error::ShapeMismatch(format!(
                "image needs {} pixels, got {}",
                Self::LEN,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("image pixels must lie in [0, 1]".into()));
        }
        Ok(Image { pixels })
    }

    /// Resize a time-frequency matrix to 100x100 and min-max normalize it.
    /// Constant matrices become all-zero images.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        let r = resize_bilinear(m, IMAGE_SIZE, IMAGE_SIZE)?;
        Ok(Image {
            pixels: min_max_normalize(r.data),
        })
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * IMAGE_SIZE + c]
    }

    /// 8-bit binary portable graymap.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut buf = format!("P5\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n").into_bytes();
        buf.extend(self.pixels.iter().map(|p| (p * 255.0).round() as u8));
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Lossless sidecar: raw little-endian f64 pixels.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let bytes: Vec<u8> = self.pixels.iter().flat_map(|p| p.to_le_bytes()).collect();
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read_raw(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() != Self::LEN * 8 {
            return Err(Error::Format(format!("{}: wrong sidecar size", path.display())));
        }
        let pixels = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Image::from_pixels(pixels)
    }
}

fn min_max_normalize(mut v: Vec<f64>) -> Vec<f64> {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        v.iter_mut().for_each(|x| *x = ((*x - lo) / span).clamp(0.0, 1.0));
    }
    v
}
