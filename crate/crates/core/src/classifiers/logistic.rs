//! PCA features feeding one binary logistic regression per class.
//!
//! Training fits PCA on the raw training pixels, projects every case onto the
//! top components, standardizes the projections and maximizes each class's
//! Bernoulli log-likelihood. Stored weights act on unstandardized projections
//! with the intercept first.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::{argmax, ClassificationResult, Classifier, PropensityVector};
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::imaging::Image;
use crate::linalg::{cholesky_solve, dot, fit_pca, gram, Matrix, PcaModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Newton-Raphson with step halving; stops once the mean gradient's
    /// largest entry drops below `tolerance`.
    Newton { max_iters: usize, tolerance: f64 },
    /// Fixed-step full-batch ascent on the mean gradient.
    GradientAscent {
        step: f64,
        max_iters: usize,
        tolerance: f64,
    },
}

impl Optimizer {
    pub fn newton() -> Self {
        Optimizer::Newton {
            max_iters: 100,
            tolerance: 1e-6,
        }
    }

    pub fn gradient_ascent() -> Self {
        Optimizer::GradientAscent {
            step: 1e-4,
            max_iters: 500,
            tolerance: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (max_iters, tolerance, step) = match *self {
            Optimizer::Newton {
                max_iters,
                tolerance,
            } => (max_iters, tolerance, 1.0),
            Optimizer::GradientAscent {
                step,
                max_iters,
                tolerance,
            } => (max_iters, tolerance, step),
        };
        if max_iters == 0
            || tolerance.is_nan()
            || tolerance < 0.0
            || !(step > 0.0 && step.is_finite())
        {
            return Err(Error::Config(format!(
                "invalid optimizer settings {self:?}"
            )));
        }
        Ok(())
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::newton()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub components: usize,
    /// Mean-center pixels before the covariance.
    pub center: bool,
    pub optimizer: Optimizer,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            components: 100,
            center: true,
            optimizer: Optimizer::default(),
        }
    }
}

/// Which number the cascade compares against its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceScore {
    /// The chosen class's own sigmoid probability.
    #[default]
    ClassProbability,
    /// The chosen class's share of the normalized propensity vector.
    Normalized,
}

impl ConfidenceScore {
    pub fn name(self) -> &'static str {
        match self {
            ConfidenceScore::ClassProbability => "class-probability",
            ConfidenceScore::Normalized => "normalized",
        }
    }
}

impl fmt::Display for ConfidenceScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConfidenceScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class-probability" => Ok(ConfidenceScore::ClassProbability),
            "normalized" => Ok(ConfidenceScore::Normalized),
            _ => Err(Error::Config(format!("unknown confidence score `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pca: PcaModel,
    weights: Matrix,
    confidence: ConfidenceScore,
}

impl LogisticModel {
    pub fn new(pca: PcaModel, weights: Matrix) -> Result<Self> {
        if weights.cols() != pca.num_components() + 1 {
            return Err(Error::Dimension(format!(
                "weight rows have {} entries, expected {} components + intercept",
                weights.cols(),
                pca.num_components()
            )));
        }
        Ok(LogisticModel {
            pca,
            weights,
            confidence: ConfidenceScore::default(),
        })
    }

    pub fn with_confidence(mut self, confidence: ConfidenceScore) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    /// `num_classes x (components + 1)`, intercept first.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn confidence_score(&self) -> ConfidenceScore {
        self.confidence
    }

    pub fn logits(&self, pixels: &[f64]) -> Result<Vec<f64>> {
        let z = self.pca.project(pixels)?;
        Ok((0..self.weights.rows())
            .map(|c| {
                let w = self.weights.row(c);
                w[0] + dot(&w[1..], &z)
            })
            .collect())
    }

    pub fn predict(&self, img: &Image) -> Result<ClassificationResult> {
        let logits = self.logits(img.pixels())?;
        let log_scores: Vec<f64> = logits.iter().map(|&t| log_sigmoid(t)).collect();
        let top = log_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = log_scores.iter().map(|l| (l - top).exp()).collect();
        let propensities = PropensityVector::normalize(&scaled)?;
        let predicted_class = propensities.argmax();
        let confidence = match self.confidence {
            ConfidenceScore::ClassProbability => {
                log_scores[predicted_class].exp().max(f64::MIN_POSITIVE)
            }
            ConfidenceScore::Normalized => propensities.values()[predicted_class],
        };
        Ok(ClassificationResult {
            predicted_class,
            propensities,
            confidence,
        })
    }
}

impl Classifier for LogisticModel {
    fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    fn classify(&self, img: &Image) -> Result<ClassificationResult> {
        self.predict(img)
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

fn linear_predictor(design: &Matrix, beta: &[f64]) -> Vec<f64> {
    (0..design.rows())
        .map(|r| dot(design.row(r), beta))
        .collect()
}

fn mean_log_likelihood(eta: &[f64], targets: &[f64]) -> f64 {
    let total: f64 = eta
        .iter()
        .zip(targets)
        .map(|(&e, &t)| t * log_sigmoid(e) + (1.0 - t) * log_sigmoid(-e))
        .sum();
    total / eta.len() as f64
}

fn mean_gradient(design: &Matrix, eta: &[f64], targets: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; design.cols()];
    for (r, (&e, &t)) in eta.iter().zip(targets).enumerate() {
        let resid = t - sigmoid(e);
        for (gj, x) in g.iter_mut().zip(design.row(r)) {
            *gj += resid * x;
        }
    }
    let n = eta.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    g
}

/// Mean Bernoulli log-likelihood of `targets` (0/1) under coefficients `beta`.
pub fn log_likelihood(design: &Matrix, targets: &[f64], beta: &[f64]) -> f64 {
    mean_log_likelihood(&linear_predictor(design, beta), targets)
}

/// Analytic gradient of [`log_likelihood`] with respect to `beta`.
pub fn log_likelihood_gradient(design: &Matrix, targets: &[f64], beta: &[f64]) -> Vec<f64> {
    mean_gradient(design, &linear_predictor(design, beta), targets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFit {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Mean log-likelihood at the start and after every iteration.
    pub log_likelihoods: Vec<f64>,
}

fn check_finite(ll: f64) -> Result<f64> {
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(Error::Numeric(format!("log-likelihood became {ll}")))
    }
}

const NEWTON_RIDGE: f64 = 1e-10;
const MIN_STEP: f64 = 1e-10;

/// Maximizes the binary logistic log-likelihood from zero coefficients.
pub fn fit_binary(design: &Matrix, targets: &[f64], optimizer: &Optimizer) -> Result<BinaryFit> {
    optimizer.validate()?;
    if targets.len() != design.rows() {
        return Err(Error::Dimension(format!(
            "{} targets for {} rows",
            targets.len(),
            design.rows()
        )));
    }
    let (n, p) = (design.rows(), design.cols());
    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; n];
    let mut ll = check_finite(mean_log_likelihood(&eta, targets))?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    match *optimizer {
        Optimizer::Newton {
            max_iters,
            tolerance,
        } => {
            while iterations < max_iters {
                let g = mean_gradient(design, &eta, targets);
                if g.iter().all(|v| v.abs() < tolerance) {
                    converged = true;
                    break;
                }
                let weights: Vec<f64> = eta
                    .iter()
                    .map(|&e| {
                        let s = sigmoid(e);
                        (s * (1.0 - s)).sqrt()
                    })
                    .collect();
                let mut info = gram(n, p, |r, out| {
                    for (o, x) in out.iter_mut().zip(design.row(r)) {
                        *o = weights[r] * x;
                    }
                });
                info.iter_mut().for_each(|v| *v /= n as f64);
                for j in 0..p {
                    info[j * p + j] += NEWTON_RIDGE;
                }
                let direction = cholesky_solve(&info, p, &g)?;

                let mut step = 1.0;
                let accepted = loop {
                    let candidate: Vec<f64> = beta
                        .iter()
                        .zip(&direction)
                        .map(|(b, d)| b + step * d)
                        .collect();
                    let cand_eta = linear_predictor(design, &candidate);
                    let cand_ll = mean_log_likelihood(&cand_eta, targets);
                    if cand_ll.is_finite() && cand_ll >= ll {
                        break Some((candidate, cand_eta, cand_ll));
                    }
                    step *= 0.5;
                    if step < MIN_STEP {
                        break None;
                    }
                };
                iterations += 1;
                match accepted {
                    Some((b, e, l)) => {
                        beta = b;
                        eta = e;
                        ll = l;
                        trace.push(ll);
                    }
                    // No ascent left at machine precision.
                    None => {
                        converged = true;
                        break;
                    }
                }
            }
        }
        Optimizer::GradientAscent {
            step,
            max_iters,
            tolerance,
        } => {
            while iterations < max_iters {
                let g = mean_gradient(design, &eta, targets);
                if g.iter().all(|v| v.abs() < tolerance) {
                    converged = true;
                    break;
                }
                beta.iter_mut().zip(&g).for_each(|(b, gj)| *b += step * gj);
                eta = linear_predictor(design, &beta);
                ll = check_finite(mean_log_likelihood(&eta, targets))?;
                trace.push(ll);
                iterations += 1;
            }
        }
    }

    Ok(BinaryFit {
        coefficients: beta,
        iterations,
        converged,
        log_likelihoods: trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// One entry per class.
    pub fits: Vec<BinaryFit>,
    pub training_accuracy: f64,
}

pub fn train_logistic(train: &LabeledDataset, opts: &TrainOptions) -> Result<LogisticModel> {
    train_logistic_with_report(train, opts).map(|(model, _)| model)
}

pub fn train_logistic_with_report(
    train: &LabeledDataset,
    opts: &TrainOptions,
) -> Result<(LogisticModel, TrainReport)> {
    if train.is_empty() {
        return Err(Error::Precondition("training set is empty".into()));
    }
    let (w, h, c) = train.shape();
    let dim = w * h * c;
    if opts.components == 0 || opts.components > dim {
        return Err(Error::Config(format!(
            "component count {} outside 1..={dim}",
            opts.components
        )));
    }
    opts.optimizer.validate()?;

    let n = train.len();
    let pca = {
        let mut pixels = Vec::with_capacity(n * dim);
        for img in train.images() {
            pixels.extend_from_slice(img.pixels());
        }
        fit_pca(&Matrix::new(n, dim, pixels)?, opts.components, opts.center)?
    };

    let k = opts.components;
    let mut projected = Vec::with_capacity(n * k);
    for img in train.images() {
        projected.extend(pca.project(img.pixels())?);
    }
    let mut mu = vec![0.0; k];
    for row in projected.chunks_exact(k) {
        mu.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    let mut sd = vec![0.0; k];
    for row in projected.chunks_exact(k) {
        for ((s, v), m) in sd.iter_mut().zip(row).zip(&mu) {
            *s += (v - m) * (v - m);
        }
    }
    for s in sd.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s <= 1e-12 {
            *s = 1.0;
        }
    }
    let mut design = Vec::with_capacity(n * (k + 1));
    for row in projected.chunks_exact(k) {
        design.push(1.0);
        design.extend(row.iter().zip(&mu).zip(&sd).map(|((v, m), s)| (v - m) / s));
    }
    drop(projected);
    let design = Matrix::new(n, k + 1, design)?;

    let fits = (0..train.num_classes())
        .into_par_iter()
        .map(|class| {
            let targets: Vec<f64> = train
                .labels()
                .iter()
                .map(|&l| if l == class { 1.0 } else { 0.0 })
                .collect();
            fit_binary(&design, &targets, &opts.optimizer)
                .map_err(|e| Error::Numeric(format!("class {class}: {e}")))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let correct = (0..n)
        .filter(|&r| {
            let logits: Vec<f64> = fits
                .iter()
                .map(|f| dot(design.row(r), &f.coefficients))
                .collect();
            argmax(&logits) == train.labels()[r]
        })
        .count();

    let mut weights = Vec::with_capacity(fits.len() * (k + 1));
    for fit in &fits {
        let b = &fit.coefficients;
        let slopes: Vec<f64> = b[1..].iter().zip(&sd).map(|(b, s)| b / s).collect();
        let intercept = b[0] - slopes.iter().zip(&mu).map(|(w, m)| w * m).sum::<f64>();
        weights.push(intercept);
        weights.extend(slopes);
    }
    let model = LogisticModel::new(pca, Matrix::new(fits.len(), k + 1, weights)?)?;
    let report = TrainReport {
        fits,
        training_accuracy: correct as f64 / n as f64,
    };
    Ok((model, report))
}
