use proptest::prelude::*;
use solidsum::bernoulli1d::periodized_eval;

proptest! {
    #[test]
    fn periodic_with_period_one(n in 0usize..=16, k in -4096i64..4096, shift in -5i64..=5) {
        // Dyadic points make `x + shift` exact.
        let x = k as f64 / 1024.0;
        prop_assert_eq!(periodized_eval(n, x + shift as f64), periodized_eval(n, x));
    }

    #[test]
    fn derivative_lowers_the_index(n in 0usize..=12, t in 0.01f64..0.99, k in -3i64..=3) {
        let x = t + k as f64;
        let h = 1e-5;
        let fd = (periodized_eval(n + 1, x + h) - periodized_eval(n + 1, x - h)) / (2.0 * h);
        prop_assert!((fd - periodized_eval(n, x)).abs() < 1e-7, "n={} x={}: {} vs {}", n, x, fd, periodized_eval(n, x));
    }
}

#[test]
fn odd_indices_vanish_at_integers() {
    for n in (1..=31).step_by(2) {
        for k in -3..=3 {
            assert_eq!(periodized_eval(n, k as f64), 0.0, "n={n} k={k}");
        }
    }
}
