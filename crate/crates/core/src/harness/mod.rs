//! The `echoseg` command-line workflows: synthesis, training, evaluation,
//! measurement and reporting.

pub mod checkpoint;
pub mod config;
pub mod eval;
pub mod measure;
pub mod report;
pub mod train;

use std::fs;
use std::path::Path;

pub(crate) use crate::data::dataset::csv_error;
use crate::error::{Error, Result};

pub use config::RunConfig;

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

pub(crate) fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `"0.945 ± 0.120"`: mean and sample SD of the finite values.
pub fn mean_sd_cell(values: &[f64]) -> String {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    match v.len() {
        0 => "NaN".to_string(),
        1 => format!("{:.3} ± NaN", v[0]),
        _ => format!("{:.3} ± {:.3}", crate::stats::mean(&v), crate::stats::sample_sd(&v)),
    }
}
