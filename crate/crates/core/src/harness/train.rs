//! Cross-validated training.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::Model;
use crate::autograd::Tape;
use crate::data::dataset::{compose_input, load_dataset, ImageSample};
use crate::data::elastic::elastic_deform;
use crate::data::folds::{make_sample_folds, FoldAssignment};
use crate::data::phantom::synthetic_dataset;
use crate::error::{ensure, Error, Result};
use crate::harness::checkpoint;
use crate::harness::config::RunConfig;
use crate::harness::{create_dir, csv_error, csv_writer, flush};
use crate::metrics::dice;
use crate::nn::{sgd_step, OptimizerState};
use crate::tensor::Tensor;

pub const TRAIN_LOG: &str = "train_log.csv";
pub const FOLDS_LOG: &str = "folds.csv";

/// Mixes a base seed with stream indices (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    let mut z = base;
    for &s in stream {
        z = z.wrapping_add(s.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Samples named by `data`: a dataset directory, or `synthetic:<subjects>`
/// generated at extent `n` from `seed`. Directory samples are resized to `n`.
pub fn load_samples(data: &str, n: usize, seed: u64) -> Result<Vec<ImageSample>> {
    if let Some(count) = data.strip_prefix("synthetic:") {
        let count: usize = count
            .parse()
            .map_err(|_| Error::contract(format!("bad synthetic count in {data:?}")))?;
        ensure!(count >= 1, "synthetic dataset needs at least one subject");
        return synthetic_dataset(n, count, seed);
    }
    Ok(load_dataset(Path::new(data))?
        .into_iter()
        .map(|s| s.resized(n))
        .collect())
}

/// The original plus `factor − 1` elastic warps of every sample.
pub fn augment(
    samples: &[ImageSample],
    factor: usize,
    alpha: f64,
    sigma: f64,
    seed: u64,
) -> Result<Vec<ImageSample>> {
    let mut out = Vec::with_capacity(samples.len() * factor);
    for (i, s) in samples.iter().enumerate() {
        out.push(s.clone());
        for k in 1..factor {
            let mut warped = elastic_deform(s, alpha, sigma, derive_seed(seed, &[i as u64, k as u64]))?;
            warped.id = format!("{}~{k}", s.id);
            out.push(warped);
        }
    }
    Ok(out)
}

/// A network input with its target mask.
#[derive(Clone, Debug)]
pub struct Example {
    pub id: String,
    pub input: Tensor<f32>,
    pub target: Vec<u8>,
}

pub fn prepare(samples: &[ImageSample], niblack_k: f64) -> Vec<Example> {
    samples
        .iter()
        .map(|s| Example {
            id: s.id.clone(),
            input: compose_input(&s.image, niblack_k),
            target: s.mask.data.clone(),
        })
        .collect()
}

/// Optimizer and loop settings of one training run.
#[derive(Clone, Debug)]
pub struct FitParams {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl FitParams {
    pub fn from_config(cfg: &RunConfig) -> Self {
        FitParams {
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
            lr_decay: cfg.lr_decay,
            batch_size: cfg.batch_size,
            epochs: cfg.epochs,
            seed: cfg.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub fold: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub val_dice: f64,
}

pub struct FitResult {
    /// Highest validation Dice seen; the initialization when no epoch ran.
    pub best: Model<f32>,
    pub best_val_dice: f64,
    pub last: Model<f32>,
    pub log: Vec<EpochLog>,
}

/// Mean Dice of the model's segmentations; NaN for an empty set.
pub fn mean_dice(model: &Model<f32>, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut sum = 0.0;
    for ex in examples {
        let pred = model.forward_segment(&ex.input)?;
        let truth = crate::data::image::Mask::new(pred.width, pred.height, ex.target.clone())?;
        sum += dice(&pred, &truth)?;
    }
    Ok(sum / examples.len() as f64)
}

/// One epoch of mini-batch SGD; returns the mean per-sample loss.
fn run_epoch(
    model: &mut Model<f32>,
    train: &[Example],
    order: &[usize],
    opt: &mut OptimizerState<f32>,
    batch_size: usize,
    epoch: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (b, batch) in order.chunks(batch_size).enumerate() {
        let scale = 1.0 / batch.len() as f32;
        for &i in batch {
            let ex = &train[i];
            let mut tape = Tape::new();
            let x = tape.input(&ex.input);
            let out = model.forward(&mut tape, x)?;
            let loss = tape.softmax_cross_entropy(out.logits, &ex.target)?;
            let value = tape.scalar(loss)? as f64;
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    lr: opt.learning_rate(),
                    detail: format!("sample {}", ex.id),
                });
            }
            total += value;
            let scaled = tape.scale(loss, scale);
            tape.backward(scaled, &mut model.params)?;
        }
        sgd_step(&mut model.params, opt)?;
        if !model.params.iter().all(|(_, p)| p.tensor.all_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: b,
                lr: opt.learning_rate(),
                detail: "parameters became non-finite after the update".into(),
            });
        }
    }
    Ok(total / order.len().max(1) as f64)
}

/// Trains `model` and tracks the best-validation snapshot.
pub fn fit(
    mut model: Model<f32>,
    train: &[Example],
    val: &[Example],
    params: &FitParams,
    fold: usize,
) -> Result<FitResult> {
    ensure!(!train.is_empty(), "fold {fold} has no training samples");
    ensure!(params.batch_size >= 1, "batch size must be positive");
    let mut opt = OptimizerState::new(
        params.learning_rate,
        params.momentum,
        params.weight_decay,
        params.lr_decay,
    );
    let mut best = model.clone();
    let mut best_val_dice = f64::NEG_INFINITY;
    let mut log = Vec::with_capacity(params.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..params.epochs {
        opt.set_epoch(epoch);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, &[fold as u64, epoch as u64]));
        order.shuffle(&mut rng);
        let loss = run_epoch(&mut model, train, &order, &mut opt, params.batch_size, epoch)?;
        let val_dice = mean_dice(&model, val)?;
        log::info!("fold {fold} epoch {epoch}: loss {loss:.5}, val dice {val_dice:.4}");
        log.push(EpochLog {
            fold,
            epoch,
            lr: opt.learning_rate(),
            loss,
            val_dice,
        });
        if val_dice > best_val_dice {
            best_val_dice = val_dice;
            best = model.clone();
        }
    }
    Ok(FitResult {
        best,
        best_val_dice,
        last: model,
        log,
    })
}

pub fn checkpoint_name(fold: usize) -> String {
    format!("fold{fold}.ckpt")
}

pub struct TrainSummary {
    pub folds: FoldAssignment,
    pub log: Vec<EpochLog>,
    pub best_val_dice: Vec<f64>,
}

/// Full k-fold run: writes the resolved config, the fold audit, the epoch
/// log and one best-validation checkpoint per fold into `cfg.out_dir`.
pub fn train_command(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let model_config = cfg.model_config()?;
    let samples = load_samples(&cfg.data_dir, cfg.n, cfg.seed)?;
    let folds = make_sample_folds(&samples, cfg.folds, cfg.seed)?;
    let out = &cfg.out_dir;
    create_dir(out)?;
    cfg.save(&out.join("config.json"))?;

    let audit = out.join(FOLDS_LOG);
    let mut w = csv_writer(&audit)?;
    w.write_record(["fold", "role", "id", "subject"])
        .map_err(|e| csv_error(&audit, e))?;
    for k in 0..cfg.folds {
        for (role, idx) in [("train", folds.training(k)), ("held_out", folds.held_out(k))] {
            for i in idx {
                let s = &samples[i];
                w.write_record([k.to_string().as_str(), role, &s.id, &s.subject])
                    .map_err(|e| csv_error(&audit, e))?;
            }
        }
    }
    flush(w, &audit)?;

    let log_path = out.join(TRAIN_LOG);
    let mut logw = csv_writer(&log_path)?;
    logw.write_record(["fold", "epoch", "lr", "loss", "val_dice"])
        .map_err(|e| csv_error(&log_path, e))?;
    let params = FitParams::from_config(cfg);
    let mut all_logs = Vec::new();
    let mut best_val_dice = Vec::new();
    for k in 0..cfg.folds {
        let train_samples: Vec<ImageSample> =
            folds.training(k).into_iter().map(|i| samples[i].clone()).collect();
        let val_samples: Vec<ImageSample> =
            folds.held_out(k).into_iter().map(|i| samples[i].clone()).collect();
        let augmented = augment(
            &train_samples,
            cfg.augmentation_factor,
            cfg.elastic_alpha,
            cfg.elastic_sigma,
            derive_seed(cfg.seed, &[k as u64]),
        )?;
        let train = prepare(&augmented, cfg.niblack_k);
        let val = prepare(&val_samples, cfg.niblack_k);
        let model = Model::<f32>::build(model_config, derive_seed(cfg.seed, &[k as u64, u64::MAX]))?;
        let result = fit(model, &train, &val, &params, k)?;
        for e in &result.log {
            logw.write_record([
                e.fold.to_string(),
                e.epoch.to_string(),
                e.lr.to_string(),
                e.loss.to_string(),
                e.val_dice.to_string(),
            ])
            .map_err(|err| csv_error(&log_path, err))?;
        }
        checkpoint::write(&result.best, &out.join(checkpoint_name(k)))?;
        best_val_dice.push(result.best_val_dice);
        all_logs.extend(result.log);
    }
    flush(logw, &log_path)?;
    Ok(TrainSummary {
        folds,
        log: all_logs,
        best_val_dice,
    })
}
