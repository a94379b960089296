//! Experiment configuration in a line-oriented `key = value` format.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Unknown keys are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rescascade_core::analysis::DEFAULT_THRESHOLDS;
use rescascade_core::classifiers::{
    ConfidenceScore, ExternalClassifierSpec, Optimizer, TrainOptions,
};
use rescascade_core::{Error, Pathway, ResolutionLadder, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Idx,
    Cifar10,
}

impl DatasetFormat {
    fn name(self) -> &'static str {
        match self {
            DatasetFormat::Idx => "idx",
            DatasetFormat::Cifar10 => "cifar10",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Logistic,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Newton,
    Gradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub format: DatasetFormat,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub train_batches: Vec<PathBuf>,
    pub test_batches: Vec<PathBuf>,
    pub classifier: ClassifierKind,
    pub components: usize,
    pub optimizer: OptimizerKind,
    pub step: f64,
    /// `None` uses the optimizer's own default.
    pub max_iters: Option<usize>,
    pub tolerance: f64,
    pub confidence: ConfidenceScore,
    pub external_command: Option<String>,
    pub external_args: Vec<String>,
    pub external_timeout_secs: f64,
    pub external_num_classes: usize,
    pub cascade_factors: Vec<usize>,
    pub thresholds: Vec<f64>,
    pub pathway: Pathway,
    pub grayscale: bool,
    pub pca_center: bool,
    pub eval_factors: Vec<usize>,
    pub analyze_factors: Vec<usize>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            format: DatasetFormat::Idx,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            train_batches: Vec::new(),
            test_batches: Vec::new(),
            classifier: ClassifierKind::Logistic,
            components: 100,
            optimizer: OptimizerKind::Newton,
            step: 1e-4,
            max_iters: None,
            tolerance: 1e-6,
            confidence: ConfidenceScore::default(),
            external_command: None,
            external_args: Vec::new(),
            external_timeout_secs: 30.0,
            external_num_classes: 10,
            cascade_factors: vec![4, 2, 1],
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            pathway: Pathway::default(),
            grayscale: false,
            pca_center: true,
            eval_factors: vec![1, 2, 4, 7, 14],
            analyze_factors: vec![1],
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("`{key}`: expected {expected}, got `{value}`"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, expected))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

pub fn parse_factors(key: &str, value: &str) -> Result<Vec<usize>> {
    split_list(value)
        .map(|v| parse_num(key, v, "a comma-separated list of positive integers"))
        .collect()
}

pub fn parse_thresholds(key: &str, value: &str) -> Result<Vec<f64>> {
    split_list(value)
        .map(|v| parse_num(key, v, "a comma-separated list of numbers"))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn path_list(items: &[PathBuf]) -> String {
    items
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value));
        match key {
            "dataset.format" => {
                self.format = match value {
                    "idx" => DatasetFormat::Idx,
                    "cifar10" => DatasetFormat::Cifar10,
                    _ => return Err(bad(key, value, "idx or cifar10")),
                }
            }
            "dataset.train_images" => self.train_images = path(),
            "dataset.train_labels" => self.train_labels = path(),
            "dataset.test_images" => self.test_images = path(),
            "dataset.test_labels" => self.test_labels = path(),
            "dataset.train_batches" => {
                self.train_batches = split_list(value).map(PathBuf::from).collect()
            }
            "dataset.test_batches" => {
                self.test_batches = split_list(value).map(PathBuf::from).collect()
            }
            "classifier" => {
                self.classifier = match value {
                    "logistic" => ClassifierKind::Logistic,
                    "external" => ClassifierKind::External,
                    _ => return Err(bad(key, value, "logistic or external")),
                }
            }
            "logistic.components" => self.components = parse_num(key, value, "a positive integer")?,
            "logistic.optimizer" => {
                self.optimizer = match value {
                    "newton" => OptimizerKind::Newton,
                    "gradient" => OptimizerKind::Gradient,
                    _ => return Err(bad(key, value, "newton or gradient")),
                }
            }
            "logistic.step" => self.step = parse_num(key, value, "a number")?,
            "logistic.max_iters" => {
                self.max_iters = Some(parse_num(key, value, "a positive integer")?)
            }
            "logistic.tolerance" => self.tolerance = parse_num(key, value, "a number")?,
            "logistic.confidence" => self.confidence = value.parse()?,
            "external.command" => self.external_command = Some(value.to_string()),
            "external.args" => {
                self.external_args = value.split_whitespace().map(String::from).collect()
            }
            "external.timeout_secs" => {
                self.external_timeout_secs = parse_num(key, value, "a number of seconds")?
            }
            "external.num_classes" => {
                self.external_num_classes = parse_num(key, value, "a positive integer")?
            }
            "cascade.factors" => self.cascade_factors = parse_factors(key, value)?,
            "cascade.thresholds" => self.thresholds = parse_thresholds(key, value)?,
            "cascade.pathway" => self.pathway = value.parse()?,
            "cascade.grayscale" => self.grayscale = parse_bool(key, value)?,
            "pca.center" => self.pca_center = parse_bool(key, value)?,
            "eval.factors" => self.eval_factors = parse_factors(key, value)?,
            "analyze.factors" => self.analyze_factors = parse_factors(key, value)?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = parse_num(key, value, "a nonnegative integer")?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// The on-disk form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("dataset.format", self.format.name().into());
        for (k, v) in [
            ("dataset.train_images", &self.train_images),
            ("dataset.train_labels", &self.train_labels),
            ("dataset.test_images", &self.test_images),
            ("dataset.test_labels", &self.test_labels),
        ] {
            if let Some(p) = v {
                put(k, p.display().to_string());
            }
        }
        if !self.train_batches.is_empty() {
            put("dataset.train_batches", path_list(&self.train_batches));
        }
        if !self.test_batches.is_empty() {
            put("dataset.test_batches", path_list(&self.test_batches));
        }
        put(
            "classifier",
            match self.classifier {
                ClassifierKind::Logistic => "logistic",
                ClassifierKind::External => "external",
            }
            .into(),
        );
        put("logistic.components", self.components.to_string());
        put(
            "logistic.optimizer",
            match self.optimizer {
                OptimizerKind::Newton => "newton",
                OptimizerKind::Gradient => "gradient",
            }
            .into(),
        );
        put("logistic.step", self.step.to_string());
        if let Some(m) = self.max_iters {
            put("logistic.max_iters", m.to_string());
        }
        put("logistic.tolerance", self.tolerance.to_string());
        put("logistic.confidence", self.confidence.to_string());
        if let Some(c) = &self.external_command {
            put("external.command", c.clone());
        }
        if !self.external_args.is_empty() {
            put("external.args", self.external_args.join(" "));
        }
        put(
            "external.timeout_secs",
            self.external_timeout_secs.to_string(),
        );
        put(
            "external.num_classes",
            self.external_num_classes.to_string(),
        );
        put("cascade.factors", join(&self.cascade_factors));
        put("cascade.thresholds", join(&self.thresholds));
        put("cascade.pathway", self.pathway.to_string());
        put("cascade.grayscale", self.grayscale.to_string());
        put("pca.center", self.pca_center.to_string());
        put("eval.factors", join(&self.eval_factors));
        put("analyze.factors", join(&self.analyze_factors));
        put("output.dir", self.output_dir.display().to_string());
        put("seed", self.seed.to_string());
        out
    }

    /// Value checks that need no I/O.
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::Config(
                "logistic.components must be at least 1".into(),
            ));
        }
        self.optimizer()?.validate()?;
        ResolutionLadder::new(self.cascade_factors.clone())?;
        if let Some(t) = self
            .thresholds
            .iter()
            .find(|t| !(**t > 0.0 && **t <= 1.001))
        {
            return Err(Error::Config(format!("threshold {t} outside (0, 1.001]")));
        }
        for (key, factors) in [
            ("eval.factors", &self.eval_factors),
            ("analyze.factors", &self.analyze_factors),
        ] {
            if factors.is_empty() || factors.contains(&0) {
                return Err(Error::Config(format!("`{key}` needs positive factors")));
            }
        }
        if self.classifier == ClassifierKind::External {
            if self.external_command.is_none() {
                return Err(Error::Config(
                    "classifier = external needs external.command".into(),
                ));
            }
            if !(self.external_timeout_secs.is_finite() && self.external_timeout_secs > 0.0) {
                return Err(Error::Config(
                    "external.timeout_secs must be positive".into(),
                ));
            }
            if self.external_num_classes == 0 {
                return Err(Error::Config(
                    "external.num_classes must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn optimizer(&self) -> Result<Optimizer> {
        let opt = match self.optimizer {
            OptimizerKind::Newton => Optimizer::Newton {
                max_iters: self.max_iters.unwrap_or(100),
                tolerance: self.tolerance,
            },
            OptimizerKind::Gradient => Optimizer::GradientAscent {
                step: self.step,
                max_iters: self.max_iters.unwrap_or(500),
                tolerance: self.tolerance,
            },
        };
        opt.validate()?;
        Ok(opt)
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        Ok(TrainOptions {
            components: self.components,
            center: self.pca_center,
            optimizer: self.optimizer()?,
        })
    }

    pub fn ladder(&self) -> Result<ResolutionLadder> {
        ResolutionLadder::new(self.cascade_factors.clone())
    }

    pub fn external_spec(&self) -> Result<ExternalClassifierSpec> {
        let command = self
            .external_command
            .clone()
            .ok_or_else(|| Error::Config("external.command is not set".into()))?;
        Ok(ExternalClassifierSpec::new(command)
            .args(self.external_args.clone())
            .num_classes(self.external_num_classes)
            .timeout(Duration::from_secs_f64(self.external_timeout_secs)))
    }
}
