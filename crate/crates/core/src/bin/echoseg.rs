use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use echoseg::data::dataset::save_dataset;
use echoseg::harness::checkpoint;
use echoseg::harness::eval::evaluate_command;
use echoseg::harness::measure::{measure_samples, write_measurements, MEASUREMENTS_CSV};
use echoseg::harness::report::{build_report, write_report, MethodFile};
use echoseg::harness::train::{load_samples, train_command};
use echoseg::harness::RunConfig;
use echoseg::stats::CvDenominator;
use echoseg::Result;

#[derive(Parser)]
#[command(name = "echoseg", version, about = "Left-ventricle segmentation and measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// unet | dilated-unet | mfp-unet
    #[arg(long)]
    arch: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic phantom dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Number of subjects (each gives an ED and an ES image).
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Image extent.
        #[arg(long)]
        size: Option<usize>,
    },
    /// k-fold training; writes checkpoints and logs.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory or `synthetic:<subjects>`.
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Segment a dataset with a checkpoint and score it.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: Option<String>,
    },
    /// Area–length measurements of every mask in a dataset.
    Measure {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<String>,
    },
    /// Agreement statistics between automatic and manual measurements.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manual: PathBuf,
        /// Automatic measurements, `name=path` or `path`; repeatable.
        #[arg(long, required = true)]
        auto: Vec<String>,
        /// Metrics CSVs, `name=path` or `path`; two or more add a Dice ANOVA.
        #[arg(long)]
        metrics: Vec<String>,
        /// Use (mean(auto) + mean(man)) / 2 as the CV denominator.
        #[arg(long)]
        cv_average: bool,
    },
}

fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(a) = &common.arch {
        cfg.arch = a.clone();
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common, count, size } => {
            let mut cfg = resolve(&common)?;
            if let Some(n) = size {
                cfg.n = n;
            }
            let samples = load_samples(&format!("synthetic:{count}"), cfg.n, cfg.seed)?;
            save_dataset(&cfg.out_dir, &samples)?;
            println!("wrote {} samples to {}", samples.len(), cfg.out_dir.display());
        }
        Command::Train { common, data, epochs } => {
            let mut cfg = resolve(&common)?;
            if let Some(d) = data {
                cfg.data_dir = d;
            }
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            let summary = train_command(&cfg)?;
            for (k, d) in summary.best_val_dice.iter().enumerate() {
                println!("fold {k}: best validation dice {d:.4}");
            }
        }
        Command::Eval { common, checkpoint: ckpt, data } => {
            let cfg = resolve(&common)?;
            let model = checkpoint::read_expecting(&ckpt, cfg.architecture()?)?;
            let data = data.unwrap_or(cfg.data_dir.clone());
            let samples = load_samples(&data, model.config().input_extent, cfg.seed)?;
            let rows = evaluate_command(&model, &samples, cfg.niblack_k, &cfg.out_dir)?;
            let mean = rows.iter().map(|r| r.dice).sum::<f64>() / rows.len().max(1) as f64;
            println!("{} images, mean dice {mean:.4}", rows.len());
        }
        Command::Measure { common, data } => {
            let cfg = resolve(&common)?;
            let data = data.unwrap_or(cfg.data_dir.clone());
            let samples = if data.starts_with("synthetic:") {
                load_samples(&data, cfg.n, cfg.seed)?
            } else {
                echoseg::data::dataset::load_dataset(Path::new(&data))?
            };
            let rows = measure_samples(&samples);
            std::fs::create_dir_all(&cfg.out_dir)
                .map_err(|e| echoseg::Error::io(&cfg.out_dir, e))?;
            write_measurements(&cfg.out_dir.join(MEASUREMENTS_CSV), &rows)?;
            println!("{} rows", rows.len());
        }
        Command::Report { common, manual, auto, metrics, cv_average } => {
            let cfg = resolve(&common)?;
            let autos: Vec<MethodFile> = auto
                .iter()
                .enumerate()
                .map(|(i, a)| MethodFile::parse(a, &format!("auto{}", i + 1)))
                .collect();
            let metrics: Vec<MethodFile> = metrics
                .iter()
                .enumerate()
                .map(|(i, a)| MethodFile::parse(a, &format!("method{}", i + 1)))
                .collect();
            let cv = if cv_average { CvDenominator::Average } else { CvDenominator::Sum };
            let report = build_report(&manual, &autos, &metrics, cv)?;
            write_report(&report, &cfg.out_dir)?;
            println!("{} agreement rows", report.agreement.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
