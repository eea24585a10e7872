//! Area–length measurements of the left ventricle from a binary mask.

use std::f64::consts::PI;

use crate::data::dataset::Phase;
use crate::data::image::Mask;
use crate::error::{ensure, Error, Result};
use crate::geometry::contour::extract_contour;
use crate::geometry::polygon::{Point, Polygon};
use crate::geometry::triangle::{min_enclosing_triangle, Triangle};

/// Every unit conversion of the measurement pipeline.
pub mod units {
    pub const MM_PER_CM: f64 = 10.0;

    /// Pixel length → cm, given the pixel pitch in mm.
    pub fn px_to_cm(px: f64, calibration_mm: f64) -> f64 {
        px * calibration_mm / MM_PER_CM
    }

    /// Pixel count → cm².
    pub fn px2_to_cm2(count: f64, calibration_mm: f64) -> f64 {
        count * calibration_mm * calibration_mm / (MM_PER_CM * MM_PER_CM)
    }

    /// Pixel length → mm.
    pub fn px_to_mm(px: f64, calibration_mm: f64) -> f64 {
        px * calibration_mm
    }
}

/// Contour points are pixel centres, half a pixel inside the region they
/// bound at either end of the long axis.
const PIXEL_EXTENT_CORRECTION: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Landmarks {
    pub annulus: [Point; 2],
    pub apex: Point,
    /// Contour indices of `annulus[0]`, `annulus[1]`, `apex`.
    pub indices: [usize; 3],
}

impl Landmarks {
    pub fn base_midpoint(&self) -> Point {
        self.annulus[0].midpoint(self.annulus[1])
    }
}

fn nearest_index(contour: &Polygon, target: Point) -> usize {
    let mut best = 0;
    for (i, p) in contour.points.iter().enumerate() {
        if p.dist2(target) < contour.points[best].dist2(target) {
            best = i;
        }
    }
    best
}

/// Distance from `p` to the line through `a` and `b` (or to `a` when they coincide).
fn line_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 {
        p.dist(a)
    } else {
        d.cross(p - a).abs() / len
    }
}

/// Nearest contour point to each triangle vertex; the apex is the one
/// farthest from the line through the other two.
pub fn lv_landmarks(contour: &Polygon, triangle: &Triangle) -> Result<Landmarks> {
    ensure!(!contour.is_empty(), "empty contour has no landmarks");
    let idx = triangle.vertices.map(|v| nearest_index(contour, v));
    let pts = idx.map(|i| contour.points[i]);
    let mut apex = 0;
    let mut far = f64::NEG_INFINITY;
    for k in 0..3 {
        let d = line_distance(pts[k], pts[(k + 1) % 3], pts[(k + 2) % 3]);
        if d > far {
            far = d;
            apex = k;
        }
    }
    let (a, b) = ((apex + 1) % 3, (apex + 2) % 3);
    let (a, b) = if idx[a] <= idx[b] { (a, b) } else { (b, a) };
    Ok(Landmarks {
        annulus: [pts[a], pts[b]],
        apex: pts[apex],
        indices: [idx[a], idx[b], idx[apex]],
    })
}

/// Long-axis length in px: from the base midpoint along the baseline normal,
/// towards the apex, to the farthest crossing of the contour.
pub fn lv_length_px(contour: &Polygon, landmarks: &Landmarks) -> Result<f64> {
    let [a, b] = landmarks.annulus;
    let base = b - a;
    if base.norm() == 0.0 {
        return Err(Error::measurement("annulus landmarks coincide"));
    }
    let m = landmarks.base_midpoint();
    let mut n = Point::new(-base.y, base.x) * (1.0 / base.norm());
    if n.dot(landmarks.apex - m) < 0.0 {
        n = n * -1.0;
    }
    let mut far: Option<f64> = None;
    let eps = 1e-9;
    for (p, q) in contour.edges() {
        let e = q - p;
        let den = n.cross(e);
        if den.abs() < eps {
            continue;
        }
        let s = (p - m).cross(e) / den;
        let u = (p - m).cross(n) / den;
        if s > eps && (-eps..=1.0 + eps).contains(&u) {
            far = Some(far.map_or(s, |f: f64| f.max(s)));
        }
    }
    far.map(|s| s + PIXEL_EXTENT_CORRECTION)
        .ok_or_else(|| Error::measurement("long axis does not cross the contour on the apex side"))
}

/// Long-axis length in cm.
pub fn lv_length(contour: &Polygon, landmarks: &Landmarks, calibration_mm: f64) -> Result<f64> {
    ensure!(calibration_mm > 0.0, "calibration must be positive");
    Ok(units::px_to_cm(lv_length_px(contour, landmarks)?, calibration_mm))
}

/// Cavity area in cm²: pixel census times pixel area.
pub fn lv_area(mask: &Mask, calibration_mm: f64) -> f64 {
    units::px2_to_cm2(mask.count() as f64, calibration_mm)
}

/// Single-plane area–length volume in mL: `8S²/(3πD)`.
pub fn lv_volume(area_cm2: f64, length_cm: f64) -> Result<f64> {
    ensure!(length_cm > 0.0, "volume needs a positive length, got {length_cm}");
    Ok(8.0 * area_cm2 * area_cm2 / (3.0 * PI * length_cm))
}

/// Percent of the end-diastolic volume ejected. An end-systolic volume
/// outside `[0, V_ED]` is logged and still computed.
pub fn ejection_fraction(v_ed: f64, v_es: f64) -> Result<f64> {
    ensure!(v_ed > 0.0, "ejection fraction needs V_ED > 0, got {v_ed}");
    if !(0.0..=v_ed).contains(&v_es) {
        log::warn!("end-systolic volume {v_es} outside [0, {v_ed}]");
    }
    Ok(100.0 * (v_ed - v_es) / v_ed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LvMeasures {
    pub phase: Phase,
    pub length_cm: f64,
    pub area_cm2: f64,
    pub volume_ml: f64,
    pub landmarks: Landmarks,
    pub triangle: Triangle,
    /// The mask had more than one 4-connected component.
    pub extra_components: bool,
}

/// Contour, enclosing triangle, landmarks, length, area and volume of one mask.
pub fn measure_mask(mask: &Mask, calibration_mm: f64, phase: Phase) -> Result<LvMeasures> {
    ensure!(calibration_mm > 0.0, "calibration must be positive");
    let trace = extract_contour(mask)?;
    if trace.had_extra_components() {
        log::warn!("mask has {} components; measuring the largest", trace.components);
    }
    let triangle = min_enclosing_triangle(&trace.polygon.points)?;
    let landmarks = lv_landmarks(&trace.polygon, &triangle)?;
    let length_cm = lv_length(&trace.polygon, &landmarks, calibration_mm)?;
    let area_cm2 = lv_area(mask, calibration_mm);
    let volume_ml = lv_volume(area_cm2, length_cm)?;
    Ok(LvMeasures {
        phase,
        length_cm,
        area_cm2,
        volume_ml,
        landmarks,
        triangle,
        extra_components: trace.had_extra_components(),
    })
}
