mod common;

use common::{random_dataset, BlockStub, RandomStub};
use proptest::prelude::*;
use rescascade_core::cascade::{benchmark_classify, classify_dataset, CascadePolicy};
use rescascade_core::imaging::{byte_cost, ResolutionLadder};

fn policy(tau: f64) -> CascadePolicy {
    CascadePolicy::new(ResolutionLadder::standard(), tau).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn escalation_is_monotone_in_threshold(seed in any::<u64>(), a in 0.0f64..1.1, b in 0.0f64..1.1) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let ds = random_dataset(40, seed);
        let low = classify_dataset(&RandomStub, &ds, &policy(lo)).unwrap();
        let high = classify_dataset(&RandomStub, &ds, &policy(hi)).unwrap();
        for (x, y) in low.traces.iter().zip(&high.traces) {
            prop_assert!(y.attempted_factors().starts_with(&x.attempted_factors()));
            prop_assert!(x.cumulative_bytes <= y.cumulative_bytes);
        }
        prop_assert!(low.summary.average_bytes() <= high.summary.average_bytes());
    }

    #[test]
    fn bytes_are_sum_of_stage_costs(seed in any::<u64>(), tau in 0.0f64..1.1) {
        let ds = random_dataset(30, seed);
        let run = classify_dataset(&RandomStub, &ds, &policy(tau)).unwrap();
        for t in &run.traces {
            let expected: u64 = t.attempted_factors().iter().map(|f| byte_cost(28 / f, 28 / f, 1)).sum();
            prop_assert_eq!(t.cumulative_bytes, expected);
        }
    }

    #[test]
    fn summary_ignores_case_order(seed in any::<u64>(), tau in 0.0f64..1.0) {
        let ds = random_dataset(30, seed);
        let order: Vec<usize> = (0..30).rev().collect();
        let shuffled = ds.subset(&order).unwrap();
        let a = classify_dataset(&RandomStub, &ds, &policy(tau)).unwrap().summary;
        let b = classify_dataset(&RandomStub, &shuffled, &policy(tau)).unwrap().summary;
        prop_assert!((a.accuracy().unwrap() - b.accuracy().unwrap()).abs() <= 1e-12);
        prop_assert!((a.average_bytes().unwrap() - b.average_bytes().unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn forced_escalation_matches_benchmark(seed in any::<u64>()) {
        let ds = random_dataset(25, seed);
        let forced = classify_dataset(&RandomStub, &ds, &policy(1.5)).unwrap();
        let bench_policy = CascadePolicy::new(ResolutionLadder::new(vec![1]).unwrap(), 0.0).unwrap();
        let bench = classify_dataset(&RandomStub, &ds, &bench_policy).unwrap();
        for (f, b) in forced.traces.iter().zip(&bench.traces) {
            prop_assert_eq!(f.predicted_class, b.predicted_class);
        }
        prop_assert_eq!(forced.summary.average_bytes(), Some(1029.0));
        let summary = benchmark_classify(&RandomStub, &ds, false).unwrap();
        prop_assert_eq!(summary.accuracy(), forced.summary.accuracy());
    }
}

#[test]
fn zero_threshold_stops_everything_at_stage_one() {
    let ds = random_dataset(50, 3);
    let run = classify_dataset(&RandomStub, &ds, &policy(0.0)).unwrap();
    assert_eq!(run.summary.average_bytes(), Some(49.0));
    assert_eq!(run.summary.stop_fractions(), Some(vec![1.0, 0.0, 0.0]));
}

#[test]
fn five_step_ladder_costs() {
    let ladder = ResolutionLadder::new(vec![14, 7, 4, 2, 1]).unwrap();
    assert_eq!(
        ladder.cumulative_costs(28, 28, 1),
        vec![4, 20, 69, 265, 1049]
    );
    let p = CascadePolicy::new(ladder, 2.0).unwrap();
    let ds = random_dataset(3, 9);
    let run = classify_dataset(&BlockStub([0.5; 3]), &ds, &p).unwrap();
    assert_eq!(run.summary.average_bytes(), Some(1049.0));
}
