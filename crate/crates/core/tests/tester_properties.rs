use pancake_core::distributions::Gmm1D;
use pancake_core::pancakes::{basis_vector, make_instance, Direction, NullSampler};
use pancake_core::rng::{stream_id, stream_rng};
use pancake_core::tester::{
    calibrate_thresholds, check_order, majority, majority_error_bound, run_test, trial_verdicts, GaussianTensors,
    Hypothesis, TestConfig,
};
use rand::Rng;

#[test]
fn calibrated_checks_hold_their_level_on_fresh_null_samples() {
    let (d, n, q) = (3, 1000, 0.95);
    let orders = [1, 2, 3, 4, 5];
    let cal = calibrate_thresholds(d, &orders, n, 200, q, 1).unwrap();
    let cfg = TestConfig::calibrated(&cal, 4, 0.1, 1.0, 0).unwrap();
    let gaussian = GaussianTensors::new(d, 5).unwrap();
    let null = NullSampler { d };
    let held_out = 300;
    let mut rejected = 0;
    for trial in 0..held_out {
        // fresh seeds, disjoint from the calibration streams
        let seed: u64 = stream_rng(99, stream_id(5, trial)).random();
        let any = orders.iter().any(|&o| {
            check_order(&null, o, &cfg, &gaussian, seed.wrapping_add(o as u64))
                .unwrap()
                .hypothesis
                == Hypothesis::H1
        });
        rejected += usize::from(any);
    }
    let rate = rejected as f64 / held_out as f64;
    let allowed = (1.0 - q) * orders.len() as f64 * 2.0;
    assert!(rate <= allowed, "null rejection rate {rate} above {allowed}");
}

#[test]
fn power_grows_with_sample_size() {
    // a weak instance: the order-4 gap is only 0.09 * 2 / sqrt(24)
    let d = 4;
    let base = Gmm1D::new(vec![-0.3f64.sqrt(), 0.3f64.sqrt()], vec![0.5, 0.5], 0.3).unwrap();
    let inst = make_instance(base, d, Direction::Explicit(basis_vector(d, 0)), 2).unwrap();
    let mut last = -1.0;
    let mut rates = Vec::new();
    for n in [5_000, 20_000, 100_000] {
        let cal = calibrate_thresholds(d, &[1, 2, 3, 4, 5], n, 100, 0.99, 3).unwrap();
        let cfg = TestConfig::calibrated(&cal, 4, 0.1, 0.5, 0).unwrap();
        let verdicts = trial_verdicts(&inst, &cfg, 12, 21).unwrap();
        let rate = verdicts.iter().filter(|v| v.hypothesis == Hypothesis::H1).count() as f64 / 12.0;
        assert!(rate >= last, "power fell to {rate} at n = {n}");
        last = rate;
        rates.push(rate);
    }
    assert!(rates[2] > rates[0], "no power gain: {rates:?}");
}

#[test]
fn verdicts_are_reproducible() {
    let d = 3;
    let cal = calibrate_thresholds(d, &[1, 2, 3, 4, 5], 500, 40, 0.95, 8).unwrap();
    let cfg = TestConfig::calibrated(&cal, 4, 0.2, 1.0, 77).unwrap();
    let null = NullSampler { d };
    assert_eq!(run_test(&null, &cfg).unwrap(), run_test(&null, &cfg).unwrap());
}

#[test]
fn voting_amplifies_a_biased_coin() {
    let eps = 0.3;
    for r in [3usize, 7, 15] {
        let mut rng = stream_rng(4, r as u64);
        let runs = 4000;
        let wrong = (0..runs)
            .filter(|_| {
                let votes: Vec<Hypothesis> = (0..r)
                    .map(|_| {
                        if rng.random::<f64>() < eps {
                            Hypothesis::H1
                        } else {
                            Hypothesis::H0
                        }
                    })
                    .collect();
                majority(&votes) == Hypothesis::H1
            })
            .count();
        let rate = wrong as f64 / runs as f64;
        assert!(
            rate <= majority_error_bound(eps, r),
            "R={r}: {rate} > {}",
            majority_error_bound(eps, r)
        );
    }
}
