use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use echoseg::arch::Model;
use echoseg::data::dataset::load_dataset;
use echoseg::harness::checkpoint;
use echoseg::harness::eval::{image_metrics, read_metrics, write_metrics, METRICS_CSV};
use echoseg::harness::measure::{read_measurements, MeasurementRow, MEASUREMENTS_CSV};
use echoseg::harness::report::{read_agreement, read_boxes, ANOVA_TXT, BOXPLOT_CSV, REPORT_CSV};
use echoseg::harness::train::{checkpoint_name, derive_seed, FOLDS_LOG, TRAIN_LOG};
use echoseg::harness::RunConfig;
use tempfile::TempDir;

fn echoseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echoseg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = echoseg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    echoseg(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthetic dataset of `count` subjects at extent 32.
fn synth(dir: &TempDir, count: usize) -> PathBuf {
    let data = dir.path().join("data");
    ok(&["synth", "--count", &count.to_string(), "--size", "32", "--seed", "3", "--out", p(&data)]);
    data
}

fn write_config(dir: &TempDir, data: &Path, extra: &str) -> PathBuf {
    let cfg = dir.path().join("run.json");
    let text = format!(
        r#"{{"n": 32, "base_width": 2, "folds": 3, "batch_size": 2, "augmentation_factor": 2, "data_dir": "{}"{extra}}}"#,
        p(data)
    );
    std::fs::write(&cfg, text).unwrap();
    cfg
}

#[test]
fn synth_writes_a_loadable_dataset() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 4);
    let samples = load_dataset(&data).unwrap();
    assert_eq!(samples.len(), 8);
    assert!(samples.iter().all(|s| s.image.width == 32 && !s.mask.is_empty()));
}

#[test]
fn zero_epoch_training_keeps_initialization() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 3);
    let cfg_path = write_config(&dir, &data, "");
    let out = dir.path().join("run");
    ok(&["train", "--config", p(&cfg_path), "--epochs", "0", "--seed", "5", "--out", p(&out)]);

    let log = std::fs::read_to_string(out.join(TRAIN_LOG)).unwrap();
    assert_eq!(log.trim(), "fold,epoch,lr,loss,val_dice");
    let cfg = RunConfig::load(&out.join("config.json")).unwrap();
    assert_eq!((cfg.seed, cfg.epochs), (5, 0));
    for k in 0..3 {
        let init = Model::<f32>::build(cfg.model_config().unwrap(), derive_seed(5, &[k, u64::MAX])).unwrap();
        let bytes = std::fs::read(out.join(checkpoint_name(k as usize))).unwrap();
        assert_eq!(bytes, checkpoint::to_bytes(&init), "fold {k}");
    }
}

#[test]
fn fold_audit_has_no_subject_leakage() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 5);
    let cfg_path = write_config(&dir, &data, "");
    let out = dir.path().join("run");
    ok(&["train", "--config", p(&cfg_path), "--epochs", "0", "--out", p(&out)]);

    let mut r = csv::Reader::from_path(out.join(FOLDS_LOG)).unwrap();
    let mut roles: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    let mut held_out_count: BTreeMap<String, usize> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.unwrap();
        let (fold, role, id, subject) = (&rec[0], &rec[1], &rec[2], &rec[3]);
        roles.entry((fold.to_string(), subject.to_string())).or_default().insert(role.to_string());
        if role == "held_out" {
            *held_out_count.entry(id.to_string()).or_default() += 1;
        }
    }
    for ((fold, subject), r) in &roles {
        assert_eq!(r.len(), 1, "subject {subject} on both sides of fold {fold}");
    }
    assert_eq!(held_out_count.len(), 10);
    assert!(held_out_count.values().all(|&c| c == 1));
}

#[test]
fn eval_measure_report_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 4);
    let cfg_path = write_config(&dir, &data, "");
    let run = dir.path().join("run");
    ok(&["train", "--config", p(&cfg_path), "--epochs", "1", "--out", p(&run)]);

    let eval = dir.path().join("eval");
    let ckpt = run.join(checkpoint_name(0));
    ok(&["eval", "--config", p(&cfg_path), "--checkpoint", p(&ckpt), "--data", p(&data), "--out", p(&eval)]);
    let rows = read_metrics(&eval.join(METRICS_CSV)).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.dice)));
    let again = dir.path().join("metrics_copy.csv");
    write_metrics(&again, &rows).unwrap();
    // HD and MAD are NaN where a prediction has no contour
    assert_eq!(format!("{:?}", read_metrics(&again).unwrap()), format!("{rows:?}"));

    let manual = dir.path().join("manual");
    ok(&["measure", "--data", p(&data), "--out", p(&manual)]);
    let manual_csv = manual.join(MEASUREMENTS_CSV);
    let measured = read_measurements(&manual_csv).unwrap();
    assert_eq!(measured.len(), 8 + 4);
    assert!(measured.iter().all(|r| r.status == "ok"), "{measured:?}");

    // identical measurements agree perfectly
    let report = dir.path().join("report");
    ok(&["report", "--manual", p(&manual_csv), "--auto", &format!("self={}", p(&manual_csv)), "--out", p(&report)]);
    let rows = read_agreement(&report.join(REPORT_CSV)).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r.method, "self");
        assert!((r.slope - 1.0).abs() < 1e-12 && r.intercept.abs() < 1e-9, "{r:?}");
        assert!((r.r - 1.0).abs() < 1e-12);
        assert_eq!((r.bias, r.sd, r.rpc), (0.0, 0.0, 0.0));
    }
    assert!(!read_boxes(&report.join(BOXPLOT_CSV)).unwrap().is_empty());
}

fn scaled(rows: &[MeasurementRow], k: f64) -> Vec<MeasurementRow> {
    rows.iter()
        .map(|r| MeasurementRow {
            length_cm: r.length_cm.map(|v| v * k),
            area_cm2: r.area_cm2.map(|v| v * k),
            volume_ml: r.volume_ml.map(|v| v * k * 1.01),
            ef_pct: r.ef_pct.map(|v| v - 1.0),
            ..r.clone()
        })
        .collect()
}

#[test]
fn report_ignores_row_order() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 5);
    let manual = dir.path().join("manual");
    ok(&["measure", "--data", p(&data), "--out", p(&manual)]);
    let manual_csv = manual.join(MEASUREMENTS_CSV);
    let rows = read_measurements(&manual_csv).unwrap();

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    let auto = scaled(&rows, 1.03);
    echoseg::harness::measure::write_measurements(&a, &auto).unwrap();
    let mut reversed = auto.clone();
    reversed.reverse();
    echoseg::harness::measure::write_measurements(&b, &reversed).unwrap();
    echoseg::harness::measure::write_measurements(&c, &scaled(&rows, 0.97)).unwrap();

    let run = |auto: &Path, out: &Path| {
        ok(&[
            "report", "--manual", p(&manual_csv),
            "--auto", &format!("m1={}", p(auto)),
            "--auto", &format!("m2={}", p(&c)),
            "--out", p(out),
        ]);
    };
    let (ra, rb) = (dir.path().join("ra"), dir.path().join("rb"));
    run(&a, &ra);
    run(&b, &rb);
    for f in [REPORT_CSV, BOXPLOT_CSV, ANOVA_TXT] {
        assert_eq!(std::fs::read(ra.join(f)).unwrap(), std::fs::read(rb.join(f)).unwrap(), "{f}");
    }
    let anova = std::fs::read_to_string(ra.join(ANOVA_TXT)).unwrap();
    assert!(anova.contains("Between groups"));
}

#[test]
fn self_agreement_metrics() {
    let dir = TempDir::new().unwrap();
    let samples = load_dataset(&synth(&dir, 2)).unwrap();
    for s in &samples {
        let m = image_metrics(&s.id, &s.mask, &s.mask, s.calibration_mm).unwrap();
        assert_eq!((m.dice, m.jaccard, m.hausdorff_mm, m.mad_mm), (1.0, 1.0, 0.0, 0.0));
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(code(&["measure", "--data", p(&missing), "--out", p(dir.path())]), 3);
    assert_eq!(code(&["synth", "--arch", "resnet", "--out", p(dir.path())]), 2);
    assert_eq!(code(&["synth", "--size", "20", "--out", p(dir.path())]), 2);

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"n": 32, "learning_rat": 0.1}"#).unwrap();
    let out = echoseg(&["synth", "--config", p(&unknown), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"folds": 1}"#).unwrap();
    assert_eq!(code(&["synth", "--config", p(&bad), "--out", p(dir.path())]), 2);

    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"MFPU\x01\x00").unwrap();
    assert_eq!(code(&["eval", "--checkpoint", p(&junk), "--data", "synthetic:1", "--out", p(dir.path())]), 3);

    assert_eq!(echoseg(&["--help"]).status.code(), Some(0));
}

#[test]
fn architecture_mismatch_is_reported() {
    let dir = TempDir::new().unwrap();
    let data = synth(&dir, 3);
    let cfg_path = write_config(&dir, &data, r#", "arch": "unet""#);
    let run = dir.path().join("run");
    ok(&["train", "--config", p(&cfg_path), "--epochs", "0", "--out", p(&run)]);
    let out = echoseg(&[
        "eval", "--config", p(&cfg_path), "--arch", "mfp-unet",
        "--checkpoint", p(&run.join(checkpoint_name(0))), "--out", p(dir.path()),
    ]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("architecture"));
}
