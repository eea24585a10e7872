//! Left-ventricle segmentation for echocardiography.
//!
//! The crate bundles a small reverse-mode autodiff engine, the U-net,
//! dilated U-net and MFP-Unet topologies built on it, global Niblack
//! preprocessing and elastic augmentation, the area–length measurement
//! pipeline (contour, enclosing triangle, landmarks, length, area, volume,
//! ejection fraction), segmentation metrics and agreement statistics, and the
//! command-line harness that ties them together.

pub mod arch;
pub mod autograd;
pub mod data;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Real, Tensor};
