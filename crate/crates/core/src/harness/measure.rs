//! Per-image area–length measurements and per-subject ejection fractions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::dataset::{ImageSample, Phase};
use crate::error::Result;
use crate::geometry::measure::{ejection_fraction, lv_area, measure_mask};
use crate::harness::{csv_error, csv_writer, flush};

pub const MEASUREMENTS_CSV: &str = "measurements.csv";
pub const EF_PHASE: &str = "EF";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    /// Image id, or the subject for EF rows.
    pub id: String,
    pub subject: String,
    /// `ED`, `ES`, `other`, or `EF` for ejection-fraction rows.
    pub phase: String,
    #[serde(rename = "D_cm")]
    pub length_cm: Option<f64>,
    #[serde(rename = "S_cm2")]
    pub area_cm2: Option<f64>,
    #[serde(rename = "V_ml")]
    pub volume_ml: Option<f64>,
    #[serde(rename = "EF_pct")]
    pub ef_pct: Option<f64>,
    pub status: String,
}

impl MeasurementRow {
    pub fn is_ef(&self) -> bool {
        self.phase == EF_PHASE
    }
}

/// One row per sample (in input order), then one EF row per subject with a
/// phase present, ordered by subject.
pub fn measure_samples(samples: &[ImageSample]) -> Vec<MeasurementRow> {
    let mut rows = Vec::with_capacity(samples.len());
    let mut volumes: BTreeMap<&str, (Option<f64>, Option<f64>, bool)> = BTreeMap::new();
    for s in samples {
        let area = lv_area(&s.mask, s.calibration_mm);
        let row = match measure_mask(&s.mask, s.calibration_mm, s.phase) {
            Ok(m) => MeasurementRow {
                id: s.id.clone(),
                subject: s.subject.clone(),
                phase: s.phase.to_string(),
                length_cm: Some(m.length_cm),
                area_cm2: Some(m.area_cm2),
                volume_ml: Some(m.volume_ml),
                ef_pct: None,
                status: if m.extra_components { "multiple_components" } else { "ok" }.into(),
            },
            Err(e) => {
                log::warn!("{}: {e}", s.id);
                MeasurementRow {
                    id: s.id.clone(),
                    subject: s.subject.clone(),
                    phase: s.phase.to_string(),
                    length_cm: None,
                    area_cm2: Some(area),
                    volume_ml: None,
                    ef_pct: None,
                    status: format!("length_failed: {e}"),
                }
            }
        };
        let entry = volumes.entry(&s.subject).or_insert((None, None, false));
        match s.phase {
            Phase::EndDiastole => {
                entry.2 |= entry.0.is_some();
                entry.0 = row.volume_ml.or(Some(f64::NAN));
            }
            Phase::EndSystole => {
                entry.2 |= entry.1.is_some();
                entry.1 = row.volume_ml.or(Some(f64::NAN));
            }
            Phase::Other => {}
        }
        rows.push(row);
    }
    for (subject, (ed, es, duplicate)) in volumes {
        let mut row = MeasurementRow {
            id: subject.to_string(),
            subject: subject.to_string(),
            phase: EF_PHASE.to_string(),
            length_cm: None,
            area_cm2: None,
            volume_ml: None,
            ef_pct: None,
            status: String::new(),
        };
        row.status = match (ed, es) {
            _ if duplicate => "ambiguous_pairing".into(),
            (Some(ed), Some(es)) if ed.is_finite() && es.is_finite() => match ejection_fraction(ed, es) {
                Ok(ef) => {
                    row.ef_pct = Some(ef);
                    if es > ed { "es_exceeds_ed".into() } else { "ok".into() }
                }
                Err(e) => format!("ef_failed: {e}"),
            },
            (Some(_), Some(_)) => "volume_missing".into(),
            (None, None) => continue,
            _ => {
                log::warn!("subject {subject}: ED/ES pair incomplete, EF omitted");
                "unpaired".into()
            }
        };
        rows.push(row);
    }
    rows
}

pub fn write_measurements(path: &Path, rows: &[MeasurementRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    if rows.is_empty() {
        w.write_record(["id", "subject", "phase", "D_cm", "S_cm2", "V_ml", "EF_pct", "status"])
            .map_err(|e| csv_error(path, e))?;
    }
    flush(w, path)
}

pub fn read_measurements(path: &Path) -> Result<Vec<MeasurementRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::phantom::generate_phantom;

    #[test]
    fn identical_phases_give_zero_ef() {
        let (ed, _) = generate_phantom(64, 3).unwrap();
        let es = ImageSample {
            id: "x_ES".into(),
            phase: Phase::EndSystole,
            ..ed.clone()
        };
        let rows = measure_samples(&[ed, es]);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].ef_pct, Some(0.0));
        assert_eq!(rows[2].status, "ok");
    }

    #[test]
    fn unpaired_subject_has_no_ef() {
        let (ed, _) = generate_phantom(64, 4).unwrap();
        let rows = measure_samples(&[ed]);
        assert_eq!(rows[1].status, "unpaired");
        assert_eq!(rows[1].ef_pct, None);
    }

    #[test]
    fn csv_round_trip() {
        let (ed, es) = generate_phantom(64, 5).unwrap();
        let rows = measure_samples(&[ed, es]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(MEASUREMENTS_CSV);
        write_measurements(&p, &rows).unwrap();
        assert_eq!(read_measurements(&p).unwrap(), rows);
    }
}
