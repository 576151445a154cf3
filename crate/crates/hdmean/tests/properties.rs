//! Structural invariants of the estimators, exercised on randomized
//! inputs: location/scale behaviour of the autocovariance traces, column
//! permutation invariance of the test statistic, two-sample symmetry, and
//! decision consistency.

use hdmean::autocov::{gram, sample_mean, trace_autocov};
use hdmean::io::ObservationMatrix;
use hdmean::numeric::{normal_quantile, RngStream};
use hdmean::stat::{test_one_sample, test_two_sample, TestResult, TwoSampleInput};
use ndarray::{Array1, Array2};
use proptest::prelude::*;

fn random_matrix(n: usize, p: usize, seed: u64) -> ObservationMatrix {
    let mut stream = RngStream::new(seed, 41, 0);
    ObservationMatrix::new(Array2::from_shape_fn((n, p), |_| stream.next_gaussian()))
        .unwrap()
}

/// Unwraps a test result, treating a non-positive variance estimate — an
/// expected outcome on very small samples — as "no statistic to check".
fn defined(result: hdmean::Result<TestResult>) -> Option<TestResult> {
    match result {
        Ok(r) => Some(r),
        Err(hdmean::Error::DegenerateVariance { .. }) => None,
        Err(other) => panic!("unexpected error: {other}"),
    }
}

#[test]
fn sample_mean_matches_naive_loop() {
    let x = random_matrix(50, 7, 1);
    let mean = sample_mean(&x);
    for j in 0..7 {
        let naive: f64 = (0..50).map(|t| x.values()[[t, j]]).sum::<f64>() / 50.0;
        assert!((mean[j] - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }
}

#[test]
fn gram_matches_triple_loop() {
    let x = random_matrix(30, 40, 2);
    let gm = gram(&x);
    for t in 0..30 {
        for s in 0..30 {
            let naive: f64 = (0..40).map(|j| x.values()[[t, j]] * x.values()[[s, j]]).sum();
            assert!((gm.g[[t, s]] - naive).abs() <= 1e-10 * naive.abs().max(1.0));
        }
        let rs: f64 = (0..30).map(|s| gm.g[[t, s]]).sum();
        assert!((gm.row_sums[t] - rs).abs() <= 1e-10 * rs.abs().max(1.0));
    }
}

#[test]
fn trace_autocov_matches_outer_product_accumulation() {
    let (n, p, m) = (25usize, 6usize, 3usize);
    let x = random_matrix(n, p, 3);
    let got = trace_autocov(&x, m).unwrap();
    let mean = sample_mean(&x);
    for h in 0..=m {
        // Explicit p×p accumulation of Γ̂(h), then its trace.
        let mut gh = Array2::<f64>::zeros((p, p));
        for t in 0..(n - h) {
            let ct = &x.values().row(t).to_owned() - &mean;
            let cth = &x.values().row(t + h).to_owned() - &mean;
            for i in 0..p {
                for j in 0..p {
                    gh[[i, j]] += ct[i] * cth[j] / n as f64;
                }
            }
        }
        let tr: f64 = (0..p).map(|i| gh[[i, i]]).sum();
        assert!(
            (got.gamma_hat[h] - tr).abs() <= 1e-10 * tr.abs().max(1.0),
            "lag {h}: {} vs {tr}",
            got.gamma_hat[h]
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trace_autocov_is_shift_invariant(
        n in 6usize..30,
        p in 1usize..8,
        seed in 0u64..1_000_000,
        shift in -5.0f64..5.0,
    ) {
        let m = 2usize.min(n - 2);
        let x = random_matrix(n, p, seed);
        let base = trace_autocov(&x, m).unwrap();
        let c = Array1::from_shape_fn(p, |j| shift * (j as f64 + 1.0));
        let shifted = hdmean::simgen::shift_rows(&x, &c).unwrap();
        let moved = trace_autocov(&shifted, m).unwrap();
        for h in 0..=m {
            prop_assert!(
                (base.gamma_hat[h] - moved.gamma_hat[h]).abs() <= 1e-10,
                "lag {h}: {} vs {}", base.gamma_hat[h], moved.gamma_hat[h]
            );
        }
    }

    #[test]
    fn trace_autocov_is_scale_equivariant(
        n in 6usize..30,
        p in 1usize..8,
        seed in 0u64..1_000_000,
        alpha in 0.1f64..4.0,
    ) {
        let m = 2usize.min(n - 2);
        let x = random_matrix(n, p, seed);
        let base = trace_autocov(&x, m).unwrap();
        let scaled_values = x.values().mapv(|v| alpha * v);
        let scaled = trace_autocov(&ObservationMatrix::new(scaled_values).unwrap(), m).unwrap();
        for h in 0..=m {
            let expect = alpha * alpha * base.gamma_hat[h];
            prop_assert!(
                (scaled.gamma_hat[h] - expect).abs() <= 1e-10 * expect.abs().max(1e-12),
                "lag {h}: {} vs {expect}", scaled.gamma_hat[h]
            );
        }
    }

    #[test]
    fn gamma0_is_nonnegative(n in 4usize..20, p in 1usize..6, seed in 0u64..1_000_000) {
        let x = random_matrix(n, p, seed);
        let g = trace_autocov(&x, 0).unwrap();
        prop_assert!(g.gamma_hat[0] >= 0.0);
    }

    #[test]
    fn statistic_is_column_permutation_invariant(
        n in 14usize..26,
        p in 2usize..8,
        seed in 0u64..1_000_000,
    ) {
        let m = 1usize;
        let x = random_matrix(n, p, seed);
        let Some(base) = defined(test_one_sample(&x, m, 0.05)) else { return Ok(()); };
        // Rotate columns by one place — a nontrivial permutation.
        let permuted_values =
            Array2::from_shape_fn((n, p), |(t, j)| x.values()[[t, (j + 1) % p]]);
        let Some(permuted) =
            defined(test_one_sample(&ObservationMatrix::new(permuted_values).unwrap(), m, 0.05))
        else { return Ok(()); };
        prop_assert!((base.statistic - permuted.statistic).abs() <= 1e-10);
        prop_assert!((base.numerator - permuted.numerator).abs() <= 1e-10);
        prop_assert!((base.variance - permuted.variance).abs() <= 1e-10 * base.variance.abs());
    }

    #[test]
    fn two_sample_statistic_is_swap_symmetric(
        n1 in 14usize..24,
        n2 in 14usize..24,
        p in 1usize..6,
        seed in 0u64..1_000_000,
    ) {
        let x1 = random_matrix(n1, p, seed);
        let x2 = random_matrix(n2, p, seed.wrapping_add(7_777_777));
        let fwd =
            defined(test_two_sample(&TwoSampleInput::new(x1.clone(), x2.clone(), 1).unwrap(), 0.05));
        let rev = defined(test_two_sample(&TwoSampleInput::new(x2, x1, 1).unwrap(), 0.05));
        prop_assert_eq!(fwd.is_some(), rev.is_some());
        if let (Some(fwd), Some(rev)) = (fwd, rev) {
            prop_assert!((fwd.statistic - rev.statistic).abs() <= 1e-10);
        }
    }

    #[test]
    fn decisions_are_consistent(
        n in 14usize..30,
        p in 1usize..8,
        seed in 0u64..1_000_000,
        alpha in prop::sample::select(vec![0.01, 0.05, 0.10, 0.50]),
    ) {
        let x = random_matrix(n, p, seed);
        let Some(r) = defined(test_one_sample(&x, 1, alpha)) else { return Ok(()); };
        let z = normal_quantile(1.0 - alpha).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert_eq!(r.reject, r.p_value < alpha);
        // Knife-edge agreement between the p-value and quantile routes.
        if (r.statistic - z).abs() > 1e-9 {
            prop_assert_eq!(r.reject, r.statistic > z);
        }
    }
}
