//! Contour extraction, convex hulls, minimal enclosing triangles and the
//! area–length measurement pipeline.

pub mod contour;
pub mod hull;
pub mod measure;
pub mod polygon;
pub mod triangle;

pub use contour::{extract_contour, ContourTrace};
pub use hull::convex_hull;
pub use measure::{
    ejection_fraction, lv_area, lv_landmarks, lv_length, lv_volume, measure_mask, Landmarks,
    LvMeasures,
};
pub use polygon::{Point, Polygon};
pub use triangle::{min_enclosing_triangle, Triangle};
