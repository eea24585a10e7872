//! Synthetic apical-view phantoms: a dark truncated-ellipse cavity inside a
//! bright wall over mid-gray background, with multiplicative speckle.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::dataset::{ImageSample, Phase};
use crate::data::image::{GrayImage, Mask};
use crate::error::{ensure, Result};

pub const PHANTOM_CALIBRATION_MM: f64 = 0.3;

const BACKGROUND: f64 = 110.0;
const CAVITY: f64 = 25.0;
const WALL: f64 = 215.0;
const SPECKLE: f64 = 0.25;

/// Cavity outline: an ellipse cut by a chord perpendicular to its long axis.
///
/// Coordinates are pixel-centre coordinates (`x` right, `y` down). The long
/// axis points from the base towards the apex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityShape {
    pub center: (f64, f64),
    /// Semi-axis along the base→apex direction.
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Rotation of the long axis from screen-up, radians.
    pub angle: f64,
    /// The base chord sits `truncation·semi_major` below the centre
    /// (0 = half ellipse, 1 = full ellipse).
    pub truncation: f64,
}

impl CavityShape {
    /// Full (untruncated) ellipse with its long axis vertical.
    pub fn ellipse(center: (f64, f64), semi_major: f64, semi_minor: f64) -> Self {
        CavityShape {
            center,
            semi_major,
            semi_minor,
            angle: 0.0,
            truncation: 1.0,
        }
    }

    /// Unit vector from base to apex.
    pub fn axis(&self) -> (f64, f64) {
        (self.angle.sin(), -self.angle.cos())
    }

    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (ax, ay) = self.axis();
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        // (across, along)
        (dx * -ay + dy * ax, dx * ax + dy * ay)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (u, v) = self.local(x, y);
        (u / self.semi_minor).powi(2) + (v / self.semi_major).powi(2) <= 1.0
            && v >= -self.truncation * self.semi_major
    }

    /// Midpoint of the base chord.
    pub fn base_midpoint(&self) -> (f64, f64) {
        let (ax, ay) = self.axis();
        let k = self.truncation * self.semi_major;
        (self.center.0 - k * ax, self.center.1 - k * ay)
    }

    pub fn apex(&self) -> (f64, f64) {
        let (ax, ay) = self.axis();
        (
            self.center.0 + self.semi_major * ax,
            self.center.1 + self.semi_major * ay,
        )
    }

    /// Analytic area in px².
    pub fn area(&self) -> f64 {
        let t = self.truncation.clamp(-1.0, 1.0);
        self.semi_major * self.semi_minor * (PI / 2.0 + t.asin() + t * (1.0 - t * t).sqrt())
    }

    /// Analytic base-to-apex length in px.
    pub fn length(&self) -> f64 {
        self.semi_major * (1.0 + self.truncation)
    }

    /// Linear shrink by `factor` about the base midpoint.
    pub fn shrunk(&self, factor: f64) -> Self {
        let m = self.base_midpoint();
        CavityShape {
            center: (
                m.0 + factor * (self.center.0 - m.0),
                m.1 + factor * (self.center.1 - m.1),
            ),
            semi_major: self.semi_major * factor,
            semi_minor: self.semi_minor * factor,
            ..*self
        }
    }

    /// Same outline grown by `by` px around the curved part; the base line stays put.
    fn grown(&self, by: f64) -> Self {
        let m = self.base_midpoint();
        let (ax, ay) = self.axis();
        let offset = self.truncation * self.semi_major;
        CavityShape {
            center: (m.0 + offset * ax, m.1 + offset * ay),
            semi_major: self.semi_major + by,
            semi_minor: self.semi_minor + by,
            truncation: offset / (self.semi_major + by),
            ..*self
        }
    }

    pub fn rasterize(&self, width: usize, height: usize) -> Mask {
        Mask::from_fn(width, height, |x, y| self.contains(x as f64, y as f64))
    }
}

/// Draws the ED and ES outlines for a phantom of extent `n`.
pub fn phantom_shapes(n: usize, seed: u64) -> Result<(CavityShape, CavityShape, f64)> {
    ensure!(n >= 32, "phantom extent must be at least 32, got {n}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    let semi_major = rng.random_range(0.50..0.60) * nf;
    let truncation = rng.random_range(0.0..0.1);
    // length / width between 1.5 and 2
    let aspect = rng.random_range(1.5..2.0);
    let semi_minor = semi_major * (1.0 + truncation) / (2.0 * aspect);
    let angle = rng.random_range(-15.0f64..15.0).to_radians();
    let mid = (
        nf / 2.0 + rng.random_range(-0.04..0.04) * nf,
        nf / 2.0 + rng.random_range(-0.04..0.04) * nf,
    );
    let wall = rng.random_range(2.0..4.0);
    let shrink = rng.random_range(0.6..0.85);

    let probe = CavityShape {
        center: (0.0, 0.0),
        semi_major,
        semi_minor,
        angle,
        truncation,
    };
    // place the base–apex midpoint at `mid`
    let (ax, ay) = probe.axis();
    let half = probe.length() / 2.0;
    let base = (mid.0 - half * ax, mid.1 - half * ay);
    let k = truncation * semi_major;
    let ed = CavityShape {
        center: (base.0 + k * ax, base.1 + k * ay),
        ..probe
    };
    Ok((ed, ed.shrunk(shrink), wall))
}

fn render(
    n: usize,
    shape: &CavityShape,
    wall: f64,
    rng: &mut ChaCha8Rng,
) -> (GrayImage, Mask) {
    let outer = shape.grown(wall);
    let speckle = Normal::new(1.0, SPECKLE).expect("valid normal");
    let mask = shape.rasterize(n, n);
    let mut data = Vec::with_capacity(n * n);
    for y in 0..n {
        for x in 0..n {
            let (xf, yf) = (x as f64, y as f64);
            let base = if mask.get(x, y) {
                CAVITY
            } else if outer.contains(xf, yf) {
                WALL
            } else {
                BACKGROUND
            };
            let v = base * speckle.sample(rng).max(0.0);
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    (GrayImage { width: n, height: n, data }, mask)
}

/// An end-diastole / end-systole pair for one synthetic subject.
///
/// The ES cavity is the ED cavity shrunk linearly by a random factor in
/// `[0.6, 0.85]` about the base midpoint.
pub fn generate_phantom(n: usize, seed: u64) -> Result<(ImageSample, ImageSample)> {
    let (ed_shape, es_shape, wall) = phantom_shapes(n, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let subject = format!("phantom{seed:04}");
    let mut make = |shape: &CavityShape, phase: Phase| {
        let (image, mask) = render(n, shape, wall, &mut rng);
        ImageSample {
            id: format!("{subject}_{phase}"),
            subject: subject.clone(),
            phase,
            image,
            mask,
            calibration_mm: PHANTOM_CALIBRATION_MM,
        }
    };
    let ed = make(&ed_shape, Phase::EndDiastole);
    let es = make(&es_shape, Phase::EndSystole);
    Ok((ed, es))
}

/// `count` subjects (seeds `seed..seed+count`), each contributing ED and ES.
pub fn synthetic_dataset(n: usize, count: usize, seed: u64) -> Result<Vec<ImageSample>> {
    let mut out = Vec::with_capacity(2 * count);
    for s in seed..seed + count as u64 {
        let (ed, es) = generate_phantom(n, s)?;
        out.push(ed);
        out.push(es);
    }
    Ok(out)
}
