//! Labelled samples and the on-disk sample manifest.
//!
//! A dataset directory holds `samples.csv` with columns
//! `id,subject,phase,calibration_mm,image,mask`; image and mask paths are
//! relative to the directory and point at P5 PGM files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::image::{GrayImage, Mask};
use crate::data::{niblack, pgm};
use crate::error::{ensure, Error, Result};
use crate::tensor::{Real, Tensor};

pub const MANIFEST: &str = "samples.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "ED")]
    EndDiastole,
    #[serde(rename = "ES")]
    EndSystole,
    #[serde(rename = "other")]
    Other,
}

impl Phase {
    pub fn tag(self) -> &'static str {
        match self {
            Phase::EndDiastole => "ED",
            Phase::EndSystole => "ES",
            Phase::Other => "other",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ED" => Ok(Phase::EndDiastole),
            "ES" => Ok(Phase::EndSystole),
            "other" => Ok(Phase::Other),
            _ => Err(Error::contract(format!("unknown phase tag {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageSample {
    pub id: String,
    pub subject: String,
    pub phase: Phase,
    pub image: GrayImage,
    pub mask: Mask,
    /// Millimetres per pixel.
    pub calibration_mm: f64,
}

impl ImageSample {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.image.width == self.mask.width && self.image.height == self.mask.height,
            "sample {}: image {}×{} and mask {}×{} differ",
            self.id,
            self.image.width,
            self.image.height,
            self.mask.width,
            self.mask.height
        );
        ensure!(
            self.calibration_mm > 0.0 && self.calibration_mm.is_finite(),
            "sample {}: calibration must be positive",
            self.id
        );
        Ok(())
    }

    /// Resamples to `n×n` (bilinear image, nearest mask). Calibration follows
    /// the horizontal scale factor.
    pub fn resized(&self, n: usize) -> ImageSample {
        if self.image.width == n && self.image.height == n {
            return self.clone();
        }
        ImageSample {
            image: self.image.resize_bilinear(n, n),
            mask: self.mask.resize_nearest(n, n),
            calibration_mm: self.calibration_mm * self.image.width as f64 / n as f64,
            ..self.clone()
        }
    }
}

/// Two-channel network input: the image scaled to `[0, 1]` and its global
/// Niblack map scaled to `{0, 1}`.
pub fn compose_input<T: Real>(image: &GrayImage, niblack_k: f64) -> Tensor<T> {
    let thr = niblack::niblack_threshold(image, niblack_k);
    let scale = 1.0 / 255.0;
    let data = image
        .data
        .iter()
        .chain(&thr.data)
        .map(|&v| T::from_f64_lossy(v as f64 * scale))
        .collect();
    Tensor::new(vec![2, image.height, image.width], data).expect("two full planes")
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    subject: String,
    phase: Phase,
    calibration_mm: f64,
    image: String,
    mask: String,
}

/// Writes PGMs under `images/` and `masks/` plus the manifest.
pub fn save_dataset(dir: &Path, samples: &[ImageSample]) -> Result<()> {
    for sub in ["images", "masks"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let manifest = dir.join(MANIFEST);
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| csv_error(&manifest, e))?;
    for s in samples {
        let image = format!("images/{}.pgm", s.id);
        let mask = format!("masks/{}.pgm", s.id);
        pgm::write(dir.join(&image), &s.image)?;
        pgm::write(dir.join(&mask), &s.mask.to_gray())?;
        w.serialize(ManifestRow {
            id: s.id.clone(),
            subject: s.subject.clone(),
            phase: s.phase,
            calibration_mm: s.calibration_mm,
            image,
            mask,
        })
        .map_err(|e| csv_error(&manifest, e))?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))
}

pub fn load_dataset(dir: &Path) -> Result<Vec<ImageSample>> {
    let manifest = dir.join(MANIFEST);
    let mut r = csv::Reader::from_path(&manifest).map_err(|e| csv_error(&manifest, e))?;
    let mut out = Vec::new();
    for row in r.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| csv_error(&manifest, e))?;
        let image = pgm::read(dir.join(&row.image))?;
        let mask = Mask::from_gray(&pgm::read(dir.join(&row.mask))?);
        let sample = ImageSample {
            id: row.id,
            subject: row.subject,
            phase: row.phase,
            image,
            mask,
            calibration_mm: row.calibration_mm,
        };
        sample.validate()?;
        out.push(sample);
    }
    Ok(out)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

/// Resolves `path` relative to `base` unless it is absolute.
pub fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
