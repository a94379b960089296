//! Batch experiments: train a model, evaluate it per resolution, sweep cascade
//! thresholds and emit calibration diagnostics as CSV.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rescascade_core::analysis::{
    emit_csv, resolution_accuracy_table, threshold_sweep, BinsTable, CorrelationRow,
    CorrelationTable, ResolutionTable, SweepTable,
};
use rescascade_core::cascade::{benchmark_classify, CascadePolicy};
use rescascade_core::classifiers::{
    load_model, save_model, train_logistic_with_report, Classifier, ExternalClassifier,
};
use rescascade_core::datasets::{load_cifar10_binary, load_idx, LabeledDataset};
use rescascade_core::imaging::rgb_to_grayscale;
use rescascade_core::{Error, ErrorKind, Result};

pub use config::ExperimentConfig;
use config::{parse_factors, parse_thresholds, ClassifierKind, DatasetFormat};

#[derive(Debug, Parser)]
#[command(name = "rescascade", version, about = "Resolution cascade experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// `key = value` experiment file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Model file written by `train` and read by the other commands.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Comma-separated downsampling factors for the command at hand.
    #[arg(long, global = true)]
    pub factors: Option<String>,

    /// Comma-separated cascade thresholds.
    #[arg(long, global = true)]
    pub thresholds: Option<String>,

    /// block-average, block-average-bilinear or bilinear-roundtrip.
    #[arg(long, global = true)]
    pub pathway: Option<String>,

    /// Center pixels before PCA (true or false).
    #[arg(long, global = true)]
    pub pca_center: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit PCA + one-vs-rest logistic on the training set and save the model.
    Train,
    /// Accuracy of one model at each downsampling factor.
    Eval,
    /// Cascade accuracy and bytes read at each threshold, plus the benchmark.
    Sweep,
    /// Confidence bins and confidence/correctness correlation per factor.
    Analyze,
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
        ErrorKind::Protocol => 4,
    }
}

/// The file config with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(f) = &cli.factors {
        let factors = parse_factors("--factors", f)?;
        match cli.command {
            Command::Train | Command::Sweep => cfg.cascade_factors = factors,
            Command::Eval => cfg.eval_factors = factors,
            Command::Analyze => cfg.analyze_factors = factors,
        }
    }
    if let Some(t) = &cli.thresholds {
        cfg.thresholds = parse_thresholds("--thresholds", t)?;
    }
    if let Some(p) = &cli.pathway {
        cfg.set("cascade.pathway", p)?;
    }
    if let Some(c) = &cli.pca_center {
        cfg.set("pca.center", c)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("`{key}` is not set")))
}

fn check_paths(cfg: &ExperimentConfig, train: bool) -> Result<()> {
    match cfg.format {
        DatasetFormat::Idx => {
            let keys = if train {
                [
                    ("dataset.train_images", &cfg.train_images),
                    ("dataset.train_labels", &cfg.train_labels),
                ]
            } else {
                [
                    ("dataset.test_images", &cfg.test_images),
                    ("dataset.test_labels", &cfg.test_labels),
                ]
            };
            for (key, p) in keys {
                required(p, key)?;
            }
        }
        DatasetFormat::Cifar10 => {
            let (key, list) = if train {
                ("dataset.train_batches", &cfg.train_batches)
            } else {
                ("dataset.test_batches", &cfg.test_batches)
            };
            if list.is_empty() {
                return Err(Error::Config(format!("`{key}` is not set")));
            }
        }
    }
    Ok(())
}

fn load_split(cfg: &ExperimentConfig, train: bool) -> Result<LabeledDataset> {
    match cfg.format {
        DatasetFormat::Idx => {
            let (i, l) = if train {
                (&cfg.train_images, &cfg.train_labels)
            } else {
                (&cfg.test_images, &cfg.test_labels)
            };
            load_idx(required(i, "images")?, required(l, "labels")?)
        }
        DatasetFormat::Cifar10 => load_cifar10_binary(if train {
            &cfg.train_batches
        } else {
            &cfg.test_batches
        }),
    }
}

fn to_grayscale(ds: &LabeledDataset) -> Result<LabeledDataset> {
    let (w, h, c) = ds.shape();
    if c == 1 {
        return Ok(ds.clone());
    }
    let images = ds
        .images()
        .iter()
        .map(rgb_to_grayscale)
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(images, ds.labels().to_vec(), ds.num_classes(), (w, h, 1))
}

fn model_path(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cli.model
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("model.cscd"))
}

fn make_classifier(cli: &Cli, cfg: &ExperimentConfig) -> Result<Box<dyn Classifier + Send>> {
    match cfg.classifier {
        ClassifierKind::Logistic => {
            let model = load_model(model_path(cli, cfg))?.with_confidence(cfg.confidence);
            Ok(Box::new(model))
        }
        ClassifierKind::External => Ok(Box::new(ExternalClassifier::new(cfg.external_spec()?)?)),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn opt_pct(v: Option<f64>) -> String {
    v.map(|a| format!("{:.2}%", 100.0 * a))
        .unwrap_or_else(|| "n/a".into())
}

fn train(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    if cfg.classifier == ClassifierKind::External {
        return Err(Error::Config(
            "external classifiers are trained outside this tool".into(),
        ));
    }
    check_paths(cfg, true)?;
    let opts = cfg.train_options()?;
    let mut ds = load_split(cfg, true)?;
    if cfg.grayscale {
        ds = to_grayscale(&ds)?;
    }
    eprintln!(
        "training on {} cases ({} components)",
        ds.len(),
        opts.components
    );
    let (model, report) = train_logistic_with_report(&ds, &opts)?;
    let path = model_path(cli, cfg);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_model(&model, &path)?;
    let unconverged = report.fits.iter().filter(|f| !f.converged).count();
    if unconverged > 0 {
        eprintln!(
            "warning: {unconverged} of {} class fits hit the iteration limit",
            report.fits.len()
        );
    }
    println!(
        "training accuracy: {:.2}%",
        100.0 * report.training_accuracy
    );
    println!("model written to {}", path.display());
    Ok(())
}

fn eval(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    check_paths(cfg, false)?;
    let classifier = make_classifier(cli, cfg)?;
    let ds = load_split(cfg, false)?;
    let rows = resolution_accuracy_table(
        &classifier,
        &ds,
        &cfg.eval_factors,
        cfg.pathway,
        cfg.grayscale,
    )?;
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("eval.csv");
    emit_csv(&ResolutionTable(&rows), &path)?;
    for r in &rows {
        println!(
            "factor {:>2} ({}x{}): {}",
            r.factor,
            r.width,
            r.height,
            opt_pct(r.accuracy())
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    check_paths(cfg, false)?;
    let mut thresholds = cfg.thresholds.clone();
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        eprintln!("warning: thresholds {thresholds:?} are not ascending; sorting them");
        thresholds.sort_by(|a, b| a.total_cmp(b));
    }
    let classifier = make_classifier(cli, cfg)?;
    let ds = load_split(cfg, false)?;
    let ladder = cfg.ladder()?;
    let num_stages = ladder.len();
    let policy = CascadePolicy::new(ladder, 0.0)?
        .with_pathway(cfg.pathway)
        .with_grayscale(cfg.grayscale);
    let rows = threshold_sweep(&classifier, &ds, &policy, &thresholds)?;
    let benchmark = benchmark_classify(&classifier, &ds, cfg.grayscale)?;
    for r in &rows {
        println!(
            "threshold {:<6} accuracy {} avg bytes {}",
            r.threshold,
            opt_pct(r.summary.accuracy()),
            r.summary
                .average_bytes()
                .map(|b| format!("{b:.1}"))
                .unwrap_or_else(|| "n/a".into())
        );
    }
    println!(
        "benchmark        accuracy {} avg bytes {}",
        opt_pct(benchmark.accuracy()),
        benchmark
            .average_bytes()
            .map(|b| format!("{b:.1}"))
            .unwrap_or_else(|| "n/a".into())
    );
    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("sweep.csv");
    emit_csv(
        &SweepTable {
            num_stages,
            rows,
            benchmark: Some(benchmark),
        },
        &path,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn analyze(cli: &Cli, cfg: &ExperimentConfig) -> Result<()> {
    check_paths(cfg, false)?;
    let classifier = make_classifier(cli, cfg)?;
    let ds = load_split(cfg, false)?;
    let rows = resolution_accuracy_table(
        &classifier,
        &ds,
        &cfg.analyze_factors,
        cfg.pathway,
        cfg.grayscale,
    )?;
    let mut bins = Vec::new();
    let mut correlations = Vec::new();
    for r in &rows {
        bins.push((r.factor, r.bins()?));
        let pearson_r = r.correlation()?;
        let accuracy = r
            .accuracy()
            .ok_or_else(|| Error::Precondition("test set is empty".into()))?;
        println!(
            "factor {:>2}: accuracy {:.2}%, correlation {pearson_r:.4}",
            r.factor,
            100.0 * accuracy
        );
        correlations.push(CorrelationRow {
            factor: r.factor,
            cases: r.cases(),
            accuracy,
            pearson_r,
        });
    }
    create_dir(&cfg.output_dir)?;
    let (bp, cp) = (
        cfg.output_dir.join("bins.csv"),
        cfg.output_dir.join("correlation.csv"),
    );
    emit_csv(&BinsTable(bins), &bp)?;
    emit_csv(&CorrelationTable(correlations), &cp)?;
    println!("wrote {} and {}", bp.display(), cp.display());
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("CASCADE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Error::Config(format!(
                "CASCADE_THREADS must be a positive integer, got `{value}`"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot configure {n} threads: {e}")))
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    init_threads()?;
    match cli.command {
        Command::Train => train(cli, &cfg),
        Command::Eval => eval(cli, &cfg),
        Command::Sweep => sweep(cli, &cfg),
        Command::Analyze => analyze(cli, &cfg),
    }
}
