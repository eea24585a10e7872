//! Agreement report between automatic and manual measurements.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::eval::read_metrics;
use crate::harness::measure::{read_measurements, MeasurementRow};
use crate::harness::{create_dir, csv_error, csv_writer, flush};
use crate::stats::{
    anova_oneway, bland_altman, paired_t_test, pearson_fit, BoxSummary, CvDenominator,
    PairedSeries,
};

pub const REPORT_CSV: &str = "report.csv";
pub const BOXPLOT_CSV: &str = "boxplot.csv";
pub const ANOVA_TXT: &str = "anova.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parameter {
    Volume,
    Area,
    Length,
    Ef,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [Parameter::Volume, Parameter::Area, Parameter::Length, Parameter::Ef];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Volume => "volume",
            Parameter::Area => "area",
            Parameter::Length => "length",
            Parameter::Ef => "EF",
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            Parameter::Volume => "mL",
            Parameter::Area => "cm2",
            Parameter::Length => "cm",
            Parameter::Ef => "%",
        }
    }

    fn value(self, row: &MeasurementRow) -> Option<f64> {
        let v = match self {
            Parameter::Volume => row.volume_ml,
            Parameter::Area => row.area_cm2,
            Parameter::Length => row.length_cm,
            Parameter::Ef => row.ef_pct,
        };
        v.filter(|x| x.is_finite())
    }

    fn applies(self, row: &MeasurementRow) -> bool {
        (self == Parameter::Ef) == row.is_ef()
    }
}

/// A named input file, given on the command line as `name=path` or `path`.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodFile {
    pub name: String,
    pub path: PathBuf,
}

impl MethodFile {
    pub fn parse(arg: &str, fallback: &str) -> Self {
        match arg.split_once('=') {
            Some((name, path)) if !name.is_empty() => MethodFile {
                name: name.to_string(),
                path: PathBuf::from(path),
            },
            _ => MethodFile {
                name: fallback.to_string(),
                path: PathBuf::from(arg),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub method: String,
    pub parameter: String,
    pub units: String,
    pub n: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub bias: f64,
    pub sd: f64,
    pub loa_low: f64,
    pub loa_high: f64,
    pub rpc: f64,
    pub cv_pct: Option<f64>,
    pub t: f64,
    /// Paired two-sided t-test; an approximation, not a reproduction.
    pub p_paired_t_approx: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRow {
    pub method: String,
    pub parameter: String,
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    /// `;`-separated.
    pub outliers: String,
}

impl BoxRow {
    fn new(method: &str, parameter: Parameter, b: &BoxSummary) -> Self {
        BoxRow {
            method: method.to_string(),
            parameter: parameter.name().to_string(),
            n: b.n,
            min: b.min,
            q1: b.q1,
            median: b.median,
            q3: b.q3,
            max: b.max,
            lower_whisker: b.lower_whisker,
            upper_whisker: b.upper_whisker,
            outliers: b.outliers.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
        }
    }
}

pub struct Report {
    pub agreement: Vec<AgreementRow>,
    pub boxes: Vec<BoxRow>,
    pub anova_text: String,
}

type Keyed = BTreeMap<(String, String), MeasurementRow>;

fn keyed(rows: Vec<MeasurementRow>, path: &Path) -> Result<Keyed> {
    let mut map = BTreeMap::new();
    for r in rows {
        let key = (r.id.clone(), r.phase.clone());
        if map.insert(key, r).is_some() {
            return Err(Error::format(path, "duplicate (id, phase) row"));
        }
    }
    Ok(map)
}

fn check_ids(manual: &Keyed, auto: &Keyed, method: &str) -> Result<()> {
    let a: BTreeSet<_> = manual.keys().collect();
    let b: BTreeSet<_> = auto.keys().collect();
    let offending: Vec<String> = a
        .symmetric_difference(&b)
        .map(|(id, phase)| format!("{id} ({phase})"))
        .collect();
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "ids of {method} do not match the manual measurements: {}",
            offending.join(", ")
        )))
    }
}

/// `(auto, manual)` pairs of a parameter where both values exist, in key order.
fn pairs(manual: &Keyed, auto: &Keyed, p: Parameter) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::new();
    let mut m = Vec::new();
    for (key, mrow) in manual {
        if !p.applies(mrow) {
            continue;
        }
        if let (Some(x), Some(y)) = (p.value(&auto[key]), p.value(mrow)) {
            a.push(x);
            m.push(y);
        }
    }
    (a, m)
}

fn column(rows: &Keyed, p: Parameter) -> Vec<f64> {
    rows.values().filter(|r| p.applies(r)).filter_map(|r| p.value(r)).collect()
}

/// Builds the agreement report. `metrics` files, when two or more are given,
/// add a Dice ANOVA across methods.
pub fn build_report(
    manual_path: &Path,
    autos: &[MethodFile],
    metrics: &[MethodFile],
    cv: CvDenominator,
) -> Result<Report> {
    let manual = keyed(read_measurements(manual_path)?, manual_path)?;
    let mut methods = Vec::with_capacity(autos.len());
    for f in autos {
        let rows = keyed(read_measurements(&f.path)?, &f.path)?;
        check_ids(&manual, &rows, &f.name)?;
        methods.push((f.name.clone(), rows));
    }

    let mut agreement = Vec::new();
    let mut boxes = Vec::new();
    for p in Parameter::ALL {
        if let Ok(b) = BoxSummary::new(&column(&manual, p)) {
            boxes.push(BoxRow::new("manual", p, &b));
        }
        for (name, rows) in &methods {
            if let Ok(b) = BoxSummary::new(&column(rows, p)) {
                boxes.push(BoxRow::new(name, p, &b));
            }
            let (a, m) = pairs(&manual, rows, p);
            let series = match PairedSeries::new(p.name(), p.units(), a, m) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("{name}/{}: skipped ({e})", p.name());
                    continue;
                }
            };
            let ba = bland_altman(&series, cv);
            let (slope, intercept, r) = match pearson_fit(&series) {
                Ok(f) => (f.slope, f.intercept, f.r),
                Err(_) => (f64::NAN, f64::NAN, f64::NAN),
            };
            let t = paired_t_test(&series);
            agreement.push(AgreementRow {
                method: name.clone(),
                parameter: p.name().to_string(),
                units: p.units().to_string(),
                n: series.len(),
                slope,
                intercept,
                r,
                bias: ba.bias,
                sd: ba.sd,
                loa_low: ba.loa_low,
                loa_high: ba.loa_high,
                rpc: ba.rpc,
                cv_pct: ba.cv,
                t: t.t,
                p_paired_t_approx: t.p,
            });
        }
    }

    let mut anova_text = String::new();
    if methods.len() >= 2 {
        for p in Parameter::ALL {
            let groups: Vec<Vec<f64>> = methods
                .iter()
                .map(|(_, rows)| {
                    let (a, m) = pairs(&manual, rows, p);
                    a.iter().zip(&m).map(|(x, y)| (x - y).abs()).collect()
                })
                .collect();
            let _ = writeln!(anova_text, "{} absolute error across methods", p.name());
            match anova_oneway(&groups) {
                Ok(t) => anova_text.push_str(&t.render()),
                Err(e) => {
                    let _ = writeln!(anova_text, "not computed: {e}");
                }
            }
            anova_text.push('\n');
        }
    }
    if metrics.len() >= 2 {
        let mut groups = Vec::with_capacity(metrics.len());
        for f in metrics {
            groups.push(read_metrics(&f.path)?.iter().map(|r| r.dice).collect::<Vec<_>>());
        }
        let _ = writeln!(anova_text, "Dice across methods");
        match anova_oneway(&groups) {
            Ok(t) => anova_text.push_str(&t.render()),
            Err(e) => {
                let _ = writeln!(anova_text, "not computed: {e}");
            }
        }
    }
    Ok(Report {
        agreement,
        boxes,
        anova_text,
    })
}

pub fn write_report(report: &Report, out: &Path) -> Result<()> {
    create_dir(out)?;
    let path = out.join(REPORT_CSV);
    let mut w = csv_writer(&path)?;
    for r in &report.agreement {
        w.serialize(r).map_err(|e| csv_error(&path, e))?;
    }
    flush(w, &path)?;
    let path = out.join(BOXPLOT_CSV);
    let mut w = csv_writer(&path)?;
    for r in &report.boxes {
        w.serialize(r).map_err(|e| csv_error(&path, e))?;
    }
    flush(w, &path)?;
    let path = out.join(ANOVA_TXT);
    fs::write(&path, &report.anova_text).map_err(|e| Error::io(&path, e))
}

pub fn read_agreement(path: &Path) -> Result<Vec<AgreementRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

pub fn read_boxes(path: &Path) -> Result<Vec<BoxRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}
