use hrelm_exp::metrics::{auc, ci95, smooth, Statistic};
use hrelm_exp::ExpError;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn smoothing_examples() {
    let flat = vec![7.5; 120];
    assert_eq!(smooth(&flat, 50), flat);
    let ramp: Vec<f64> = (0..30).map(|i| (i * i) as f64 * 0.37).collect();
    assert_eq!(smooth(&ramp, 1), ramp);

    // 100 zeros then 100s: k entries past the boundary average to 100·k/50.
    let step: Vec<f64> = (0..200)
        .map(|i| if i < 100 { 0.0 } else { 100.0 })
        .collect();
    let s = smooth(&step, 50);
    for k in 1..=50 {
        let direct: f64 = step[100 + k - 50..100 + k].iter().sum::<f64>() / 50.0;
        assert_eq!(s[100 + k - 1], direct);
        assert!((s[100 + k - 1] - 100.0 / 50.0 * k as f64).abs() < 1e-12);
    }
    // Prefix shrinkage.
    assert_eq!(smooth(&[2.0, 4.0, 9.0], 50), vec![2.0, 3.0, 5.0]);
}

#[test]
fn auc_examples() {
    assert!((auc(&vec![200.0; 600]) - 119.8).abs() < 1e-9);
    assert_eq!(auc(&[42.0]), 0.0);
    let ramp: Vec<f64> = (0..601).map(|i| 200.0 * i as f64 / 600.0).collect();
    assert!((auc(&ramp) - 60.0).abs() < 1e-9);
}

#[test]
fn ci_examples() {
    assert_eq!(ci95(&[3.25; 10], 0, Statistic::Mean).unwrap(), (3.25, 3.25));
    let (lo, hi) = ci95(&[0.0, 100.0], 0, Statistic::Mean).unwrap();
    assert!((0.0..=50.0).contains(&lo) && (50.0..=100.0).contains(&hi));
    assert!(matches!(
        ci95(&[1.0], 0, Statistic::Mean),
        Err(ExpError::InsufficientData { needed: 2, got: 1 })
    ));
    let (lo, hi) = ci95(&[1.0, 2.0, 4.0, 8.0], 5, Statistic::Std).unwrap();
    assert!(lo <= hrelm_exp::metrics::std_dev(&[1.0, 2.0, 4.0, 8.0]) && lo <= hi);
}

#[test]
fn bootstrap_coverage() {
    let normal = Normal::new(10.0, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 200;
    let covered = (0..trials)
        .filter(|&t| {
            let sample: Vec<f64> = (0..50).map(|_| normal.sample(&mut rng)).collect();
            let (lo, hi) = ci95(&sample, t, Statistic::Mean).unwrap();
            lo <= 10.0 && 10.0 <= hi
        })
        .count();
    assert!(
        covered as f64 >= 0.93 * trials as f64,
        "coverage {covered}/{trials}"
    );
}

proptest! {
    #[test]
    fn interval_contains_point(values in prop::collection::vec(-1e3f64..1e3, 2..40), seed in any::<u64>()) {
        for stat in [Statistic::Mean, Statistic::Std] {
            let (lo, hi) = ci95(&values, seed, stat).unwrap();
            let p = stat.of(&values);
            prop_assert!(lo <= p && p <= hi);
        }
    }

    #[test]
    fn unit_window_keeps_auc(values in prop::collection::vec(-1e3f64..1e3, 1..80)) {
        prop_assert_eq!(auc(&smooth(&values, 1)), auc(&values));
    }

    #[test]
    fn smoothing_stays_in_range(values in prop::collection::vec(0f64..200.0, 1..80), w in 1usize..60) {
        let s = smooth(&values, w);
        prop_assert_eq!(s.len(), values.len());
        for x in s {
            prop_assert!((-1e-9..=200.0 + 1e-9).contains(&x));
        }
    }
}
