//! The sequential threshold classifier: classify a coarse rendition first and
//! climb the resolution ladder only while confidence stays below threshold.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::classifiers::{Classifier, PropensityVector};
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::imaging::{byte_cost, rgb_to_grayscale, Image, Pathway, ResolutionLadder};

#[derive(Debug, Clone, PartialEq)]
pub struct CascadePolicy {
    pub ladder: ResolutionLadder,
    /// Escalate while confidence is strictly below this. Values above 1
    /// force every case up to full resolution.
    pub threshold: f64,
    pub pathway: Pathway,
    /// Convert RGB input to one luminance channel before anything else.
    /// Bytes are then counted on the grayscale image.
    pub grayscale: bool,
}

impl CascadePolicy {
    pub fn new(ladder: ResolutionLadder, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold >= 0.0) {
            return Err(Error::Config(format!(
                "threshold must be a finite value >= 0, got {threshold}"
            )));
        }
        Ok(CascadePolicy {
            ladder,
            threshold,
            pathway: Pathway::default(),
            grayscale: false,
        })
    }

    pub fn with_pathway(mut self, pathway: Pathway) -> Self {
        self.pathway = pathway;
        self
    }

    pub fn with_grayscale(mut self, grayscale: bool) -> Self {
        self.grayscale = grayscale;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        CascadePolicy::new(self.ladder.clone(), threshold)?;
        self.threshold = threshold;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub factor: usize,
    pub width: usize,
    pub height: usize,
    pub propensities: PropensityVector,
    pub predicted_class: usize,
    pub confidence: f64,
    /// Cost of this stage alone.
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTrace {
    /// Every attempted stage, in ladder order; the last one decided.
    pub stages: Vec<StageRecord>,
    pub predicted_class: usize,
    pub cumulative_bytes: u64,
}

impl CascadeTrace {
    pub fn stop_stage(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn confidence(&self) -> f64 {
        self.stages[self.stop_stage()].confidence
    }

    pub fn attempted_factors(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.factor).collect()
    }
}

pub(crate) fn prepare<'a>(img: &'a Image, grayscale: bool) -> Result<Cow<'a, Image>> {
    match (grayscale, img.channels()) {
        (false, _) | (true, 1) => Ok(Cow::Borrowed(img)),
        (true, 3) => Ok(Cow::Owned(rgb_to_grayscale(img)?)),
        (true, c) => Err(Error::Precondition(format!(
            "grayscale conversion needs 1 or 3 channels, image has {c}"
        ))),
    }
}

/// The image a classifier sees at `factor`. Factor 1 is the untouched input,
/// so full-resolution stages and benchmark runs make identical calls.
pub(crate) fn stage_input<'a>(
    img: &'a Image,
    factor: usize,
    pathway: Pathway,
) -> Result<Cow<'a, Image>> {
    if factor == 1 {
        Ok(Cow::Borrowed(img))
    } else {
        Ok(Cow::Owned(pathway.apply(img, factor)?))
    }
}

pub fn classify_case<C: Classifier + ?Sized>(
    classifier: &C,
    img: &Image,
    policy: &CascadePolicy,
) -> Result<CascadeTrace> {
    let img = prepare(img, policy.grayscale)?;
    let (w, h, c) = (img.width(), img.height(), img.channels());
    policy.ladder.validate_for(w, h)?;
    let last = policy.ladder.len() - 1;
    let mut stages = Vec::with_capacity(policy.ladder.len());
    let mut cumulative_bytes = 0;
    for (stage, &factor) in policy.ladder.factors().iter().enumerate() {
        let wrap = |source: Error| Error::Stage {
            stage: stage + 1,
            factor,
            source: Box::new(source),
        };
        let input = stage_input(&img, factor, policy.pathway).map_err(wrap)?;
        let result = classifier.classify(&input).map_err(wrap)?;
        let bytes = byte_cost(w / factor, h / factor, c);
        cumulative_bytes += bytes;
        let stop = result.confidence >= policy.threshold || stage == last;
        stages.push(StageRecord {
            factor,
            width: w / factor,
            height: h / factor,
            predicted_class: result.predicted_class,
            confidence: result.confidence,
            propensities: result.propensities,
            bytes,
        });
        if stop {
            break;
        }
    }
    let predicted_class = stages.last().expect("ladder is nonempty").predicted_class;
    Ok(CascadeTrace {
        stages,
        predicted_class,
        cumulative_bytes,
    })
}

/// Aggregate accuracy and data cost. Means are `None` for an empty run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub cases: usize,
    pub correct: usize,
    pub total_bytes: u64,
    /// Cases that stopped at each ladder stage.
    pub stop_counts: Vec<usize>,
}

impl Summary {
    pub fn empty(num_stages: usize) -> Self {
        Summary {
            cases: 0,
            correct: 0,
            total_bytes: 0,
            stop_counts: vec![0; num_stages],
        }
    }

    pub(crate) fn record(&mut self, correct: bool, bytes: u64, stop_stage: usize) {
        self.cases += 1;
        self.correct += correct as usize;
        self.total_bytes += bytes;
        self.stop_counts[stop_stage] += 1;
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.cases > 0).then(|| self.correct as f64 / self.cases as f64)
    }

    pub fn average_bytes(&self) -> Option<f64> {
        (self.cases > 0).then(|| self.total_bytes as f64 / self.cases as f64)
    }

    pub fn stop_fractions(&self) -> Option<Vec<f64>> {
        (self.cases > 0).then(|| {
            self.stop_counts
                .iter()
                .map(|&n| n as f64 / self.cases as f64)
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRun {
    pub traces: Vec<CascadeTrace>,
    pub summary: Summary,
}

/// Classifies every case, in parallel, and reduces in case order.
pub(crate) fn map_cases<T, F>(ds: &LabeledDataset, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Image) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = ds.images().par_iter().map(&f).collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|source| Error::Case {
                index,
                source: Box::new(source),
            })
        })
        .collect()
}

pub fn classify_dataset<C: Classifier + ?Sized>(
    classifier: &C,
    ds: &LabeledDataset,
    policy: &CascadePolicy,
) -> Result<DatasetRun> {
    let (w, h, _) = ds.shape();
    policy.ladder.validate_for(w, h)?;
    let traces = map_cases(ds, |img| classify_case(classifier, img, policy))?;
    let mut summary = Summary::empty(policy.ladder.len());
    for (trace, &label) in traces.iter().zip(ds.labels()) {
        summary.record(
            trace.predicted_class == label,
            trace.cumulative_bytes,
            trace.stop_stage(),
        );
    }
    Ok(DatasetRun { traces, summary })
}

/// Single pass over the full-resolution images.
pub fn benchmark_classify<C: Classifier + ?Sized>(
    classifier: &C,
    ds: &LabeledDataset,
    grayscale: bool,
) -> Result<Summary> {
    let policy =
        CascadePolicy::new(ResolutionLadder::new(vec![1])?, 0.0)?.with_grayscale(grayscale);
    Ok(classify_dataset(classifier, ds, &policy)?.summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassificationResult;

    /// Reports a fixed confidence per image width.
    struct ByWidth(Vec<(usize, f64)>);

    impl Classifier for ByWidth {
        fn num_classes(&self) -> usize {
            2
        }

        fn classify(&self, img: &Image) -> Result<ClassificationResult> {
            let p = self
                .0
                .iter()
                .find(|(w, _)| *w == img.width())
                .map(|(_, p)| *p)
                .unwrap_or(0.5);
            Ok(ClassificationResult::from_propensities(
                PropensityVector::new(vec![p, 1.0 - p]).unwrap(),
            ))
        }
    }

    /// Detects the block size of a replicated image and reports a confidence for it.
    struct ByBlock(Vec<f64>);

    impl Classifier for ByBlock {
        fn num_classes(&self) -> usize {
            2
        }

        fn classify(&self, img: &Image) -> Result<ClassificationResult> {
            let px = img.pixels();
            let block = if px[0] == px[3] {
                4
            } else if px[0] == px[1] {
                2
            } else {
                1
            };
            let p = self.0[[4, 2, 1].iter().position(|&b| b == block).unwrap()];
            Ok(ClassificationResult::from_propensities(
                PropensityVector::new(vec![p, 1.0 - p]).unwrap(),
            ))
        }
    }

    struct Failing;

    impl Classifier for Failing {
        fn num_classes(&self) -> usize {
            2
        }

        fn classify(&self, img: &Image) -> Result<ClassificationResult> {
            if img.pixels()[0] == img.pixels()[1] {
                Ok(ClassificationResult::from_propensities(
                    PropensityVector::uniform(2),
                ))
            } else {
                Err(Error::Protocol("boom".into()))
            }
        }
    }

    fn ramp() -> Image {
        Image::new(28, 28, 1, (0..784).map(|i| (i % 251) as f64).collect()).unwrap()
    }

    fn policy(t: f64) -> CascadePolicy {
        CascadePolicy::new(ResolutionLadder::standard(), t).unwrap()
    }

    #[test]
    fn byte_totals_by_stop_stage() {
        for (conf, bytes, stop) in [
            (vec![0.95, 0.5, 0.5], 49, 0),
            (vec![0.5, 0.95, 0.5], 245, 1),
            (vec![0.5, 0.5, 0.5], 1029, 2),
        ] {
            let t = classify_case(&ByBlock(conf), &ramp(), &policy(0.9)).unwrap();
            assert_eq!((t.cumulative_bytes, t.stop_stage()), (bytes, stop));
        }
    }

    #[test]
    fn equality_accepts() {
        let t = classify_case(&ByBlock(vec![0.9, 0.5, 0.5]), &ramp(), &policy(0.9)).unwrap();
        assert_eq!(t.stop_stage(), 0);
        let t = classify_case(&ByBlock(vec![1.0, 0.5, 0.5]), &ramp(), &policy(1.0)).unwrap();
        assert_eq!(t.stop_stage(), 0);
    }

    #[test]
    fn stage_dims_and_costs() {
        let t = classify_case(&ByBlock(vec![0.5; 3]), &ramp(), &policy(0.99)).unwrap();
        let dims: Vec<_> = t.stages.iter().map(|s| (s.width, s.bytes)).collect();
        assert_eq!(dims, vec![(7, 49), (14, 196), (28, 784)]);
        assert_eq!(t.attempted_factors(), vec![4, 2, 1]);
        assert_eq!(
            t.cumulative_bytes,
            t.stages.iter().map(|s| s.bytes).sum::<u64>()
        );
    }

    #[test]
    fn rgb_costs() {
        let img = Image::filled(32, 32, 3, 10.0).unwrap();
        let t = classify_case(&ByWidth(vec![]), &img, &policy(2.0)).unwrap();
        assert_eq!(t.cumulative_bytes, 192 + 768 + 3072);
        let t = classify_case(&ByWidth(vec![]), &img, &policy(2.0).with_grayscale(true)).unwrap();
        assert_eq!(t.cumulative_bytes, 64 + 256 + 1024);
    }

    #[test]
    fn stage_errors_carry_context() {
        let err = classify_case(&Failing, &ramp(), &policy(0.9)).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Stage {
                    stage: 3,
                    factor: 1,
                    ..
                }
            ),
            "{err}"
        );
        let ds = LabeledDataset::new(vec![ramp(), ramp()], vec![0, 1], 2, (28, 28, 1)).unwrap();
        let err = classify_dataset(&Failing, &ds, &policy(0.9)).unwrap_err();
        assert!(matches!(err, Error::Case { index: 0, .. }), "{err}");
        assert_eq!(err.kind(), crate::error::ErrorKind::Protocol);
    }

    #[test]
    fn indivisible_dims() {
        let img = Image::filled(30, 30, 1, 0.0).unwrap();
        let err = classify_case(&ByWidth(vec![]), &img, &policy(0.9)).unwrap_err();
        assert!(err.to_string().contains("factor 4"), "{err}");
    }

    #[test]
    fn dataset_summary() {
        let ds = LabeledDataset::new(vec![ramp(); 4], vec![0, 0, 1, 0], 2, (28, 28, 1)).unwrap();
        let run = classify_dataset(&ByBlock(vec![0.5, 0.95, 0.5]), &ds, &policy(0.9)).unwrap();
        assert_eq!(run.summary.accuracy(), Some(0.75));
        assert_eq!(run.summary.average_bytes(), Some(245.0));
        assert_eq!(run.summary.stop_fractions(), Some(vec![0.0, 1.0, 0.0]));
        let bench = benchmark_classify(&ByBlock(vec![0.5; 3]), &ds, false).unwrap();
        assert_eq!(bench.average_bytes(), Some(784.0));
    }

    #[test]
    fn empty_dataset_has_no_means() {
        let ds = LabeledDataset::new(vec![], vec![], 2, (28, 28, 1)).unwrap();
        let s = benchmark_classify(&ByWidth(vec![]), &ds, false).unwrap();
        assert_eq!((s.cases, s.accuracy(), s.average_bytes()), (0, None, None));
    }

    #[test]
    fn rejects_bad_threshold() {
        assert!(CascadePolicy::new(ResolutionLadder::standard(), f64::NAN).is_err());
        assert!(CascadePolicy::new(ResolutionLadder::standard(), -0.1).is_err());
    }
}
