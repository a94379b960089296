//! Resolution cascade inference.
//!
//! A classifier first sees a coarse, block-averaged rendition of each image
//! and only reads finer renditions while its confidence stays below a
//! threshold. Every attempted stage is paid for in bytes read.

pub mod analysis;
pub mod cascade;
pub mod classifiers;
pub mod datasets;
pub mod error;
pub mod imaging;
pub mod linalg;

pub use cascade::{
    benchmark_classify, classify_case, classify_dataset, CascadePolicy, CascadeTrace, Summary,
};
pub use classifiers::{ClassificationResult, Classifier, PropensityVector};
pub use datasets::LabeledDataset;
pub use error::{Error, ErrorKind, Result};
pub use imaging::{Image, Pathway, ResolutionLadder};
