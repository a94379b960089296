//! The classifier abstraction the cascade drives, plus the built-in
//! PCA + one-vs-rest logistic classifier and the external-process bridge.

mod external;
mod logistic;
mod model_io;

pub use external::{external_classify, ExternalClassifier, ExternalClassifierSpec};
pub use logistic::{
    fit_binary, log_likelihood, log_likelihood_gradient, train_logistic,
    train_logistic_with_report, BinaryFit, ConfidenceScore, LogisticModel, Optimizer, TrainOptions,
    TrainReport,
};
pub use model_io::{
    decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION,
};

use crate::error::{Error, Result};
use crate::imaging::Image;

const SUM_TOLERANCE: f64 = 1e-9;

/// Per-class probabilities summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityVector(Vec<f64>);

impl PropensityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("propensity vector is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Precondition(format!(
                "propensities must be finite and nonnegative: {values:?}"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Precondition(format!(
                "propensities sum to {sum}, not 1"
            )));
        }
        Ok(PropensityVector(values))
    }

    /// Scales nonnegative scores to sum to one.
    pub fn normalize(scores: &[f64]) -> Result<Self> {
        let sum: f64 = scores.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || scores.iter().any(|v| *v < 0.0) {
            return Err(Error::Numeric(format!(
                "cannot normalize scores {scores:?}"
            )));
        }
        PropensityVector::new(scores.iter().map(|v| v / sum).collect())
    }

    pub fn uniform(num_classes: usize) -> Self {
        PropensityVector(vec![1.0 / num_classes as f64; num_classes])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest value; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best })
}

/// A classifier's answer for one image.
///
/// `confidence` is the score compared against the cascade threshold. For
/// most classifiers it is the top propensity; the logistic classifier can
/// instead report the chosen class's own sigmoid probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub predicted_class: usize,
    pub propensities: PropensityVector,
    pub confidence: f64,
}

impl ClassificationResult {
    pub fn from_propensities(propensities: PropensityVector) -> Self {
        let predicted_class = propensities.argmax();
        ClassificationResult {
            predicted_class,
            confidence: propensities.values()[predicted_class],
            propensities,
        }
    }
}

pub trait Classifier: Sync {
    fn num_classes(&self) -> usize;

    fn classify(&self, img: &Image) -> Result<ClassificationResult>;
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn classify(&self, img: &Image) -> Result<ClassificationResult> {
        (**self).classify(img)
    }
}

impl<C: Classifier + ?Sized + Send> Classifier for Box<C> {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }

    fn classify(&self, img: &Image) -> Result<ClassificationResult> {
        (**self).classify(img)
    }
}
