//! Calibration and cost diagnostics over classifier outputs, plus CSV tables.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::cascade::{classify_dataset, map_cases, prepare, stage_input, CascadePolicy, Summary};
use crate::classifiers::Classifier;
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::imaging::{byte_cost, check_divides, Pathway};

/// Upper edges of all bins but the last; the lowest bin also takes
/// everything at or below 0.20.
const BIN_EDGES: [f64; 8] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const NUM_BINS: usize = BIN_EDGES.len() + 1;
pub const DEFAULT_THRESHOLDS: [f64; 6] = [0.80, 0.90, 0.95, 0.975, 0.99, 0.999];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub correct: usize,
}

impl Bin {
    /// `None` for an empty bin.
    pub fn accuracy(&self) -> Option<f64> {
        (self.count > 0).then(|| self.correct as f64 / self.count as f64)
    }
}

/// Cases grouped by confidence into (0.1, 0.2], (0.2, 0.3], ..., (0.9, 1.0].
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityBins {
    pub bins: [Bin; NUM_BINS],
    pub total: usize,
}

impl PropensityBins {
    pub fn fraction(&self, bin: usize) -> Option<f64> {
        (self.total > 0).then(|| self.bins[bin].count as f64 / self.total as f64)
    }

    pub fn fractions(&self) -> Option<Vec<f64>> {
        (self.total > 0).then(|| (0..NUM_BINS).map(|b| self.fraction(b).unwrap()).collect())
    }

    pub fn overall_accuracy(&self) -> Option<f64> {
        let correct: usize = self.bins.iter().map(|b| b.correct).sum();
        (self.total > 0).then(|| correct as f64 / self.total as f64)
    }
}

pub fn bin_index(p: f64) -> usize {
    BIN_EDGES.iter().filter(|&&e| e < p).count()
}

pub fn bin_propensities(results: &[(f64, bool)]) -> Result<PropensityBins> {
    let mut bins = [Bin {
        lower: 0.0,
        upper: 0.0,
        count: 0,
        correct: 0,
    }; NUM_BINS];
    for (i, bin) in bins.iter_mut().enumerate() {
        bin.lower = if i == 0 { 0.1 } else { BIN_EDGES[i - 1] };
        bin.upper = if i == NUM_BINS - 1 { 1.0 } else { BIN_EDGES[i] };
    }
    for &(p, correct) in results {
        if !(p > 0.0 && p <= 1.0 + 1e-9) {
            return Err(Error::Precondition(format!(
                "propensity {p} outside (0, 1]"
            )));
        }
        let bin = &mut bins[bin_index(p)];
        bin.count += 1;
        bin.correct += correct as usize;
    }
    Ok(PropensityBins {
        bins,
        total: results.len(),
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "series of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "{} cases, need at least 2",
            x.len()
        )));
    }
    let constant = |s: &[f64]| s.iter().all(|v| *v == s[0]);
    if constant(x) {
        return Err(Error::UndefinedCorrelation(
            "propensity series is constant".into(),
        ));
    }
    if constant(y) {
        return Err(Error::UndefinedCorrelation(
            "correctness series is constant".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between confidence and a 0/1 correctness indicator.
pub fn propensity_accuracy_correlation(results: &[(f64, bool)]) -> Result<f64> {
    let (p, c): (Vec<f64>, Vec<f64>) = results.iter().map(|&(p, ok)| (p, ok as u8 as f64)).unzip();
    pearson(&p, &c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub threshold: f64,
    pub summary: Summary,
}

/// Runs the cascade at each threshold.
///
/// Stage results are shared across thresholds: the run at the largest
/// threshold attempts a superset of every smaller threshold's stages, so
/// each smaller threshold's outcome is a prefix of those traces.
pub fn threshold_sweep<C: Classifier + ?Sized>(
    classifier: &C,
    ds: &LabeledDataset,
    policy: &CascadePolicy,
    thresholds: &[f64],
) -> Result<Vec<SweepResult>> {
    if thresholds
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt()))
    {
        return Err(Error::Config(format!(
            "thresholds must be ascending, got {thresholds:?}"
        )));
    }
    let Some(&max) = thresholds.last() else {
        return Ok(Vec::new());
    };
    let full = classify_dataset(classifier, ds, &policy.clone().with_threshold(max)?)?;
    thresholds
        .iter()
        .map(|&threshold| {
            CascadePolicy::new(policy.ladder.clone(), threshold)?;
            let mut summary = Summary::empty(policy.ladder.len());
            for (trace, &label) in full.traces.iter().zip(ds.labels()) {
                let stop = trace
                    .stages
                    .iter()
                    .position(|s| s.confidence >= threshold)
                    .unwrap_or(trace.stages.len() - 1);
                let bytes = trace.stages[..=stop].iter().map(|s| s.bytes).sum();
                summary.record(trace.stages[stop].predicted_class == label, bytes, stop);
            }
            Ok(SweepResult { threshold, summary })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseOutcome {
    pub predicted_class: usize,
    pub confidence: f64,
    pub correct: bool,
}

/// Non-cascade accuracy of one model at one downsampling factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionRow {
    pub factor: usize,
    pub width: usize,
    pub height: usize,
    pub bytes_per_case: u64,
    pub outcomes: Vec<CaseOutcome>,
}

impl ResolutionRow {
    pub fn cases(&self) -> usize {
        self.outcomes.len()
    }

    pub fn correct(&self) -> usize {
        self.outcomes.iter().filter(|o| o.correct).count()
    }

    pub fn accuracy(&self) -> Option<f64> {
        (self.cases() > 0).then(|| self.correct() as f64 / self.cases() as f64)
    }

    pub fn confidence_pairs(&self) -> Vec<(f64, bool)> {
        self.outcomes
            .iter()
            .map(|o| (o.confidence, o.correct))
            .collect()
    }

    pub fn bins(&self) -> Result<PropensityBins> {
        bin_propensities(&self.confidence_pairs())
    }

    pub fn correlation(&self) -> Result<f64> {
        propensity_accuracy_correlation(&self.confidence_pairs())
    }
}

pub fn resolution_accuracy_table<C: Classifier + ?Sized>(
    classifier: &C,
    ds: &LabeledDataset,
    factors: &[usize],
    pathway: Pathway,
    grayscale: bool,
) -> Result<Vec<ResolutionRow>> {
    let (w, h, c) = ds.shape();
    for &f in factors {
        check_divides(w, h, f)?;
    }
    let channels = if grayscale { 1 } else { c };
    factors
        .iter()
        .map(|&factor| {
            let predictions = map_cases(ds, |img| {
                let img = prepare(img, grayscale)?;
                classifier.classify(&*stage_input(&img, factor, pathway)?)
            })?;
            let outcomes = predictions
                .into_iter()
                .zip(ds.labels())
                .map(|(r, &label)| CaseOutcome {
                    predicted_class: r.predicted_class,
                    confidence: r.confidence,
                    correct: r.predicted_class == label,
                })
                .collect();
            Ok(ResolutionRow {
                factor,
                width: w / factor,
                height: h / factor,
                bytes_per_case: byte_cost(w / factor, h / factor, channels),
                outcomes,
            })
        })
        .collect()
}

/// A table with a fixed header and deterministic rows.
pub trait CsvTable {
    fn header(&self) -> Vec<String>;
    fn records(&self) -> Vec<Vec<String>>;
}

/// Six significant digits, no exponent.
pub fn format_real(v: f64) -> String {
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    rounded.to_string()
}

fn opt_real(v: Option<f64>) -> String {
    v.map(format_real).unwrap_or_default()
}

pub fn csv_string<T: CsvTable + ?Sized>(table: &T) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_records(&mut w, table).map_err(|e| Error::Numeric(format!("csv encoding: {e}")))?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numeric(format!("csv encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_records<W: Write, T: CsvTable + ?Sized>(
    w: &mut csv::Writer<W>,
    table: &T,
) -> csv::Result<()> {
    w.write_record(table.header())?;
    for r in table.records() {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv<T: CsvTable + ?Sized>(table: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    write_records(&mut w, table).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            detail: format!("{other:?}"),
        },
    })
}

/// `threshold,accuracy,avg_bytes,stop_frac_stage1..N`, plus an optional
/// final row whose threshold cell reads `benchmark`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub num_stages: usize,
    pub rows: Vec<SweepResult>,
    pub benchmark: Option<Summary>,
}

impl CsvTable for SweepTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["threshold".into(), "accuracy".into(), "avg_bytes".into()];
        h.extend((1..=self.num_stages).map(|i| format!("stop_frac_stage{i}")));
        h
    }

    fn records(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut rec = vec![
                    format_real(r.threshold),
                    opt_real(r.summary.accuracy()),
                    opt_real(r.summary.average_bytes()),
                ];
                match r.summary.stop_fractions() {
                    Some(f) => rec.extend(f.into_iter().map(format_real)),
                    None => rec.extend(std::iter::repeat_n(String::new(), self.num_stages)),
                }
                rec
            })
            .collect();
        if let Some(b) = &self.benchmark {
            let mut rec = vec![
                "benchmark".to_string(),
                opt_real(b.accuracy()),
                opt_real(b.average_bytes()),
            ];
            rec.extend(std::iter::repeat_n(String::new(), self.num_stages));
            out.push(rec);
        }
        out
    }
}

/// `factor,width,height,cases,accuracy,avg_bytes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionTable<'a>(pub &'a [ResolutionRow]);

impl CsvTable for ResolutionTable<'_> {
    fn header(&self) -> Vec<String> {
        [
            "factor",
            "width",
            "height",
            "cases",
            "accuracy",
            "avg_bytes",
        ]
        .map(String::from)
        .to_vec()
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|r| {
                vec![
                    r.factor.to_string(),
                    r.width.to_string(),
                    r.height.to_string(),
                    r.cases().to_string(),
                    opt_real(r.accuracy()),
                    if r.cases() > 0 {
                        format_real(r.bytes_per_case as f64)
                    } else {
                        String::new()
                    },
                ]
            })
            .collect()
    }
}

/// `factor,bin,lower,upper,count,fraction,accuracy`; empty cells mark
/// empty bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinsTable(pub Vec<(usize, PropensityBins)>);

impl CsvTable for BinsTable {
    fn header(&self) -> Vec<String> {
        [
            "factor", "bin", "lower", "upper", "count", "fraction", "accuracy",
        ]
        .map(String::from)
        .to_vec()
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .flat_map(|(factor, bins)| {
                bins.bins.iter().enumerate().map(move |(i, b)| {
                    vec![
                        factor.to_string(),
                        (i + 1).to_string(),
                        format_real(b.lower),
                        format_real(b.upper),
                        b.count.to_string(),
                        opt_real(bins.fraction(i)),
                        opt_real(b.accuracy()),
                    ]
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationRow {
    pub factor: usize,
    pub cases: usize,
    pub accuracy: f64,
    pub pearson_r: f64,
}

/// `factor,cases,accuracy,pearson_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable(pub Vec<CorrelationRow>);

impl CsvTable for CorrelationTable {
    fn header(&self) -> Vec<String> {
        ["factor", "cases", "accuracy", "pearson_r"]
            .map(String::from)
            .to_vec()
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|r| {
                vec![
                    r.factor.to_string(),
                    r.cases.to_string(),
                    format_real(r.accuracy),
                    format_real(r.pearson_r),
                ]
            })
            .collect()
    }
}
