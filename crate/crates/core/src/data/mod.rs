//! Images, masks, preprocessing, augmentation, phantoms and dataset plumbing.

pub mod dataset;
pub mod elastic;
pub mod folds;
pub mod image;
pub mod niblack;
pub mod phantom;
pub mod pgm;

pub use dataset::{ImageSample, Phase};
pub use image::{GrayImage, Mask};
