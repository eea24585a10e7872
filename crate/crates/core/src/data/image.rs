//! Grayscale images and binary masks.

use crate::error::{ensure, Result};

/// 8-bit grayscale raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        ensure!(
            width * height == data.len(),
            "{width}×{height} image needs {} bytes, got {}",
            width * height,
            data.len()
        );
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Nearest-neighbour resampling to `width×height`.
    pub fn resize_nearest(&self, width: usize, height: usize) -> GrayImage {
        let data = resize_nearest(&self.data, self.width, self.height, width, height);
        GrayImage {
            width,
            height,
            data,
        }
    }

    /// Bilinear resampling to `width×height` (pixel-centre aligned).
    pub fn resize_bilinear(&self, width: usize, height: usize) -> GrayImage {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                data.push(bilinear(&self.data, self.width, self.height, fx, fy).round() as u8);
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }
}

/// Binary mask with values in `{0, 1}`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        ensure!(
            width * height == data.len(),
            "{width}×{height} mask needs {} values, got {}",
            width * height,
            data.len()
        );
        ensure!(data.iter().all(|&v| v <= 1), "mask values must be 0 or 1");
        Ok(Mask {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Mask {
            width,
            height,
            data,
        }
    }

    /// Thresholds a grayscale image at `> 127`, so `{0, 255}` PGM masks map to `{0, 1}`.
    pub fn from_gray(img: &GrayImage) -> Self {
        Mask {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| (v > 127) as u8).collect(),
        }
    }

    /// `{0, 255}` grayscale rendering for PGM storage.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v * 255).collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn same_shape(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn resize_nearest(&self, width: usize, height: usize) -> Mask {
        Mask {
            width,
            height,
            data: resize_nearest(&self.data, self.width, self.height, width, height),
        }
    }

    /// Replicates each pixel into an `s×s` block.
    pub fn upscale(&self, s: usize) -> Mask {
        Mask::from_fn(self.width * s, self.height * s, |x, y| self.get(x / s, y / s))
    }

    /// Foreground pixel coordinates `(x, y)`.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| (i % self.width, i / self.width))
    }
}

fn resize_nearest(src: &[u8], sw: usize, sh: usize, w: usize, h: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let syi = (((y as f64 + 0.5) * sh as f64 / h as f64) as usize).min(sh - 1);
        for x in 0..w {
            let sxi = (((x as f64 + 0.5) * sw as f64 / w as f64) as usize).min(sw - 1);
            out.push(src[syi * sw + sxi]);
        }
    }
    out
}

/// Bilinear sample at `(fx, fy)`, clamped to the raster.
pub(crate) fn bilinear(src: &[u8], w: usize, h: usize, fx: f64, fy: f64) -> f64 {
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let tx = fx - x0 as f64;
    let ty = fy - y0 as f64;
    let p = |x: usize, y: usize| src[y * w + x] as f64;
    if tx == 0.0 && ty == 0.0 {
        return p(x0, y0);
    }
    (1.0 - ty) * ((1.0 - tx) * p(x0, y0) + tx * p(x1, y0))
        + ty * ((1.0 - tx) * p(x0, y1) + tx * p(x1, y1))
}
