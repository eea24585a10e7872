//! Elastic deformation: a smoothed random displacement field warps image
//! and mask identically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::dataset::ImageSample;
use crate::data::image::{bilinear, GrayImage, Mask};
use crate::error::{ensure, Result};

pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_SIGMA: f64 = 6.0;

/// Per-pixel displacement `(dx, dy)` in pixels.
#[derive(Clone, Debug)]
pub struct DisplacementField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with edge clamping.
fn smooth(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * plane[y * w + clamp(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = kernel
                .iter()
                .enumerate()
                .map(|(k, &kv)| kv * tmp[clamp(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

impl DisplacementField {
    /// Uniform `±1` noise per component, Gaussian-smoothed with width
    /// `sigma`, rescaled so the largest component magnitude is 1, then
    /// multiplied by `alpha`. `alpha` is therefore the peak displacement in
    /// pixels.
    pub fn random(width: usize, height: usize, alpha: f64, sigma: f64, seed: u64) -> Result<Self> {
        ensure!(alpha >= 0.0, "elastic amplitude must be non-negative, got {alpha}");
        ensure!(sigma > 0.0, "elastic smoothing must be positive, got {sigma}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernel = gaussian_kernel(sigma);
        let mut planes = [0, 1].map(|_| {
            let noise: Vec<f64> = (0..width * height)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            smooth(&noise, width, height, &kernel)
        });
        let peak = planes
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if peak > 0.0 { alpha / peak } else { 0.0 };
        for p in planes.iter_mut() {
            p.iter_mut().for_each(|v| *v *= scale);
        }
        let [dx, dy] = planes;
        Ok(DisplacementField {
            width,
            height,
            dx,
            dy,
        })
    }

    /// `out(x, y) = in(x + dx, y + dy)`, bilinear with edge clamping.
    pub fn warp_image(&self, img: &GrayImage) -> GrayImage {
        let mut data = Vec::with_capacity(img.data.len());
        for y in 0..img.height {
            for x in 0..img.width {
                let i = y * img.width + x;
                let v = bilinear(
                    &img.data,
                    img.width,
                    img.height,
                    x as f64 + self.dx[i],
                    y as f64 + self.dy[i],
                );
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
        GrayImage {
            width: img.width,
            height: img.height,
            data,
        }
    }

    /// Nearest-neighbour warp; samples outside the raster are background.
    pub fn warp_mask(&self, mask: &Mask) -> Mask {
        Mask::from_fn(mask.width, mask.height, |x, y| {
            let i = y * mask.width + x;
            let sx = (x as f64 + self.dx[i]).round() as isize;
            let sy = (y as f64 + self.dy[i]).round() as isize;
            mask.get_signed(sx, sy)
        })
    }
}

pub fn elastic_deform(sample: &ImageSample, alpha: f64, sigma: f64, seed: u64) -> Result<ImageSample> {
    let field = DisplacementField::random(sample.image.width, sample.image.height, alpha, sigma, seed)?;
    Ok(ImageSample {
        image: field.warp_image(&sample.image),
        mask: field.warp_mask(&sample.mask),
        ..sample.clone()
    })
}
