//! Per-image segmentation metrics against ground truth.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arch::Model;
use crate::data::dataset::{compose_input, save_dataset, ImageSample};
use crate::data::image::Mask;
use crate::error::{ensure, Result};
use crate::geometry::contour::extract_contour;
use crate::geometry::measure::units;
use crate::geometry::polygon::Point;
use crate::harness::{create_dir, csv_error, csv_writer, flush, mean_sd_cell};
use crate::metrics::{dice, hausdorff, jaccard, mad};

pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_ID: &str = "mean ± sd";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub id: String,
    #[serde(rename = "DM")]
    pub dice: f64,
    /// mm; NaN when either mask is empty.
    #[serde(rename = "HD")]
    pub hausdorff_mm: f64,
    #[serde(rename = "JC")]
    pub jaccard: f64,
    /// mm, averaged over the predicted contour; NaN when either mask is empty.
    #[serde(rename = "MAD")]
    pub mad_mm: f64,
}

fn contour_points(mask: &Mask) -> Option<Vec<Point>> {
    extract_contour(mask).ok().map(|c| c.polygon.points)
}

/// Metrics of `pred` against `truth`, distances converted with `calibration_mm`.
pub fn image_metrics(id: &str, pred: &Mask, truth: &Mask, calibration_mm: f64) -> Result<ImageMetrics> {
    ensure!(
        pred.same_shape(truth),
        "{id}: prediction {}×{} vs truth {}×{}",
        pred.width,
        pred.height,
        truth.width,
        truth.height
    );
    let (hd, md) = match (contour_points(pred), contour_points(truth)) {
        (Some(a), Some(b)) => (
            units::px_to_mm(hausdorff(&a, &b)?, calibration_mm),
            units::px_to_mm(mad(&a, &b)?, calibration_mm),
        ),
        _ => (f64::NAN, f64::NAN),
    };
    Ok(ImageMetrics {
        id: id.to_string(),
        dice: dice(pred, truth)?,
        hausdorff_mm: hd,
        jaccard: jaccard(pred, truth)?,
        mad_mm: md,
    })
}

/// Segments every sample and scores it. Returns the metrics and the
/// samples with their masks replaced by the predictions.
pub fn evaluate_model(
    model: &Model<f32>,
    samples: &[ImageSample],
    niblack_k: f64,
) -> Result<(Vec<ImageMetrics>, Vec<ImageSample>)> {
    let n = model.config().input_extent;
    let mut rows = Vec::with_capacity(samples.len());
    let mut predicted = Vec::with_capacity(samples.len());
    let start = Instant::now();
    for s in samples {
        ensure!(
            s.image.width == n && s.image.height == n,
            "{}: image is {}×{}, model expects {n}×{n}",
            s.id,
            s.image.width,
            s.image.height
        );
        let pred = model.forward_segment(&compose_input(&s.image, niblack_k))?;
        rows.push(image_metrics(&s.id, &pred, &s.mask, s.calibration_mm)?);
        predicted.push(ImageSample {
            mask: pred,
            ..s.clone()
        });
    }
    log::info!(
        "segmented {} images in {:.3} s",
        samples.len(),
        start.elapsed().as_secs_f64()
    );
    Ok((rows, predicted))
}

pub fn summary_row(rows: &[ImageMetrics]) -> [String; 5] {
    let col = |f: fn(&ImageMetrics) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    [
        SUMMARY_ID.to_string(),
        mean_sd_cell(&col(|r| r.dice)),
        mean_sd_cell(&col(|r| r.hausdorff_mm)),
        mean_sd_cell(&col(|r| r.jaccard)),
        mean_sd_cell(&col(|r| r.mad_mm)),
    ]
}

/// Per-image rows followed by the `mean ± sd` summary row.
pub fn write_metrics(path: &Path, rows: &[ImageMetrics]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["id", "DM", "HD", "JC", "MAD"])
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            r.dice.to_string(),
            r.hausdorff_mm.to_string(),
            r.jaccard.to_string(),
            r.mad_mm.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.write_record(summary_row(rows)).map_err(|e| csv_error(path, e))?;
    flush(w, path)
}

/// Per-image rows of a metrics CSV; the summary row is skipped.
pub fn read_metrics(path: &Path) -> Result<Vec<ImageMetrics>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.get(0) == Some(SUMMARY_ID) {
            continue;
        }
        out.push(rec.deserialize(Some(&headers)).map_err(|e| csv_error(path, e))?);
    }
    Ok(out)
}

/// Evaluates a checkpoint on `samples`, writing `metrics.csv` and the
/// predicted masks (as a dataset directory `pred/`) under `out`.
pub fn evaluate_command(
    model: &Model<f32>,
    samples: &[ImageSample],
    niblack_k: f64,
    out: &Path,
) -> Result<Vec<ImageMetrics>> {
    create_dir(out)?;
    let (rows, predicted) = evaluate_model(model, samples, niblack_k)?;
    write_metrics(&out.join(METRICS_CSV), &rows)?;
    save_dataset(&out.join("pred"), &predicted)?;
    Ok(rows)
}
