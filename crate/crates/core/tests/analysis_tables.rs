mod common;

use common::{random_dataset, ConstStub, RandomStub};
use rescascade_core::analysis::{
    csv_string, emit_csv, propensity_accuracy_correlation, resolution_accuracy_table,
    threshold_sweep, BinsTable, CorrelationRow, CorrelationTable, ResolutionTable, SweepTable,
    DEFAULT_THRESHOLDS,
};
use rescascade_core::cascade::{benchmark_classify, CascadePolicy};
use rescascade_core::imaging::{Pathway, ResolutionLadder};
use rescascade_core::{Error, ErrorKind};

#[test]
fn golden_pearson() {
    let r =
        propensity_accuracy_correlation(&[(0.2, false), (0.5, true), (0.8, false), (0.9, true)])
            .unwrap();
    assert!((r - 0.36514837167011066).abs() < 1e-12, "{r}");
}

#[test]
fn random_classifier_is_at_chance() {
    let ds = random_dataset(10_000, 11);
    let rows = resolution_accuracy_table(
        &RandomStub,
        &ds,
        &[1, 2, 4, 7, 14],
        Pathway::BlockAverage,
        false,
    )
    .unwrap();
    for row in &rows {
        let acc = row.accuracy().unwrap();
        assert!((acc - 0.10).abs() <= 0.03, "factor {}: {acc}", row.factor);
    }
}

#[test]
fn factor_one_equals_benchmark() {
    let ds = random_dataset(500, 5);
    let rows = resolution_accuracy_table(&RandomStub, &ds, &[1], Pathway::BilinearRoundtrip, false)
        .unwrap();
    let bench = benchmark_classify(&RandomStub, &ds, false).unwrap();
    assert_eq!(rows[0].accuracy(), bench.accuracy());
    assert_eq!(rows[0].bytes_per_case, 784);
}

#[test]
fn indivisible_factor_is_named() {
    let ds = random_dataset(2, 1);
    let err = resolution_accuracy_table(&RandomStub, &ds, &[1, 5], Pathway::BlockAverage, false)
        .unwrap_err();
    assert!(err.to_string().contains("factor 5"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Data);
}

#[test]
fn constant_confidence_has_no_correlation() {
    let ds = random_dataset(50, 2);
    let rows = resolution_accuracy_table(&ConstStub(0.7), &ds, &[1], Pathway::BlockAverage, false)
        .unwrap();
    let err = rows[0].correlation().unwrap_err();
    assert!(matches!(err, Error::UndefinedCorrelation(_)));
    assert_eq!(err.kind(), ErrorKind::Numeric);
}

#[test]
fn sweep_requires_ascending_thresholds() {
    let ds = random_dataset(5, 2);
    let policy = CascadePolicy::new(ResolutionLadder::standard(), 0.0).unwrap();
    let err = threshold_sweep(&RandomStub, &ds, &policy, &[0.9, 0.8]).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
    assert!(threshold_sweep(&RandomStub, &ds, &policy, &[])
        .unwrap()
        .is_empty());
}

#[test]
fn sweep_csv_schema_and_determinism() {
    let ds = random_dataset(200, 8);
    let policy = CascadePolicy::new(ResolutionLadder::standard(), 0.0).unwrap();
    let table = || SweepTable {
        num_stages: 3,
        rows: threshold_sweep(&RandomStub, &ds, &policy, &DEFAULT_THRESHOLDS).unwrap(),
        benchmark: Some(benchmark_classify(&RandomStub, &ds, false).unwrap()),
    };
    let dir = tempfile::tempdir().unwrap();
    emit_csv(&table(), dir.path().join("a.csv")).unwrap();
    emit_csv(&table(), dir.path().join("b.csv")).unwrap();
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(
        a,
        std::fs::read_to_string(dir.path().join("b.csv")).unwrap()
    );
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(
        lines[0],
        "threshold,accuracy,avg_bytes,stop_frac_stage1,stop_frac_stage2,stop_frac_stage3"
    );
    assert_eq!(lines.len(), 8);
    assert!(lines[1].starts_with("0.8,"));
    assert!(lines[7].starts_with("benchmark,"));
    assert!(lines[7].ends_with(",784,,,"), "{}", lines[7]);
    for line in &lines[1..7] {
        let fr: f64 = line
            .split(',')
            .skip(3)
            .map(|v| v.parse::<f64>().unwrap())
            .sum();
        assert!((fr - 1.0).abs() < 1e-5, "{line}");
    }
}

#[test]
fn resolution_bins_and_correlation_csv() {
    let ds = random_dataset(300, 4);
    let rows =
        resolution_accuracy_table(&RandomStub, &ds, &[1, 2], Pathway::BlockAverage, false).unwrap();
    let res = csv_string(&ResolutionTable(&rows)).unwrap();
    let lines: Vec<&str> = res.lines().collect();
    assert_eq!(lines[0], "factor,width,height,cases,accuracy,avg_bytes");
    assert!(lines[1].starts_with("1,28,28,300,"));
    assert!(lines[2].starts_with("2,14,14,300,") && lines[2].ends_with(",196"));

    let bins = BinsTable(rows.iter().map(|r| (r.factor, r.bins().unwrap())).collect());
    let text = csv_string(&bins).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 9);
    assert_eq!(
        text.lines().next().unwrap(),
        "factor,bin,lower,upper,count,fraction,accuracy"
    );
    // Random confidences never reach the top bins; those rows leave accuracy blank.
    assert!(text
        .lines()
        .any(|l| l.starts_with("1,9,0.9,1,0,0,") && l.ends_with(',')));

    let corr = CorrelationTable(vec![CorrelationRow {
        factor: 1,
        cases: 300,
        accuracy: 0.1,
        pearson_r: 0.123456789,
    }]);
    assert_eq!(
        csv_string(&corr).unwrap(),
        "factor,cases,accuracy,pearson_r\n1,300,0.1,0.123457\n"
    );
}
