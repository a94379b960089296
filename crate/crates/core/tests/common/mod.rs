#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use rescascade_core::classifiers::{ClassificationResult, Classifier, PropensityVector};
use rescascade_core::datasets::{load_idx, LabeledDataset};
use rescascade_core::{Image, Result};

pub fn data_dir() -> PathBuf {
    std::env::var_os("RESCASCADE_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn stub_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/stubs")
}

/// `(train, test)` from `data/<name>`, or a message saying what is missing.
pub fn load_split(name: &str) -> std::result::Result<(LabeledDataset, LabeledDataset), String> {
    let dir = data_dir().join(name);
    let load = |prefix: &str| {
        load_idx(
            dir.join(format!("{prefix}-images-idx3-ubyte")),
            dir.join(format!("{prefix}-labels-idx1-ubyte")),
        )
        .map_err(|e| format!("{e} (run scripts/fetch_data.sh)"))
    };
    Ok((load("train")?, load("t10k")?))
}

pub fn load_test(name: &str) -> std::result::Result<LabeledDataset, String> {
    let dir = data_dir().join(name);
    load_idx(
        dir.join("t10k-images-idx3-ubyte"),
        dir.join("t10k-labels-idx1-ubyte"),
    )
    .map_err(|e| format!("{e} (run scripts/fetch_data.sh)"))
}

fn two_class(p: f64, class: usize) -> ClassificationResult {
    let mut v = vec![(1.0 - p) / 9.0; 10];
    v[class] = p;
    ClassificationResult::from_propensities(PropensityVector::normalize(&v).unwrap())
}

/// Reports a fixed confidence for each block size it detects in a
/// replicated image: `conf[0]` for 4x4 blocks, `conf[1]` for 2x2, `conf[2]`
/// for full resolution. Needs an input whose first four pixels differ.
pub struct BlockStub(pub [f64; 3]);

impl Classifier for BlockStub {
    fn num_classes(&self) -> usize {
        10
    }

    fn classify(&self, img: &Image) -> Result<ClassificationResult> {
        let px = img.pixels();
        let stage = if px[0] == px[3] {
            0
        } else if px[0] == px[1] {
            1
        } else {
            2
        };
        Ok(two_class(self.0[stage], 3))
    }
}

pub fn ramp(width: usize, height: usize) -> Image {
    Image::new(
        width,
        height,
        1,
        (0..width * height).map(|i| (i % 251) as f64).collect(),
    )
    .unwrap()
}

/// Deterministic pseudo-random propensities keyed on the image content.
pub struct RandomStub;

impl Classifier for RandomStub {
    fn num_classes(&self) -> usize {
        10
    }

    fn classify(&self, img: &Image) -> Result<ClassificationResult> {
        let mut hasher = DefaultHasher::new();
        for p in img.pixels() {
            p.to_bits().hash(&mut hasher);
        }
        let mut rng = StdRng::seed_from_u64(hasher.finish());
        let scores: Vec<f64> = (0..10).map(|_| rng.gen_range(1e-3..1.0)).collect();
        Ok(ClassificationResult::from_propensities(
            PropensityVector::normalize(&scores).unwrap(),
        ))
    }
}

/// Same answer for every image.
pub struct ConstStub(pub f64);

impl Classifier for ConstStub {
    fn num_classes(&self) -> usize {
        10
    }

    fn classify(&self, _img: &Image) -> Result<ClassificationResult> {
        Ok(two_class(self.0, 0))
    }
}

/// Random 28x28 grayscale dataset.
pub fn random_dataset(n: usize, seed: u64) -> LabeledDataset {
    let mut rng = StdRng::seed_from_u64(seed);
    let images = (0..n)
        .map(|_| {
            let px = (0..784).map(|_| rng.gen_range(0..=255u8) as f64).collect();
            Image::new(28, 28, 1, px).unwrap()
        })
        .collect();
    let labels = (0..n).map(|_| rng.gen_range(0..10)).collect();
    LabeledDataset::new(images, labels, 10, (28, 28, 1)).unwrap()
}
