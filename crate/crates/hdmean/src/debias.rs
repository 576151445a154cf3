//! Exact-unbiasedness machinery for tr(Ω_n): the coefficient matrix Θ_n
//! with E[γ̂] = Θ_n γ, the weight vector b with b'γ = tr(Ω_n), the solved
//! weights β = (Θ_n')⁻¹ b, and χ_n.
//!
//! Θ_n is derived from the exact expectation identity for the centered
//! sample autocovariance traces rather than any printed indicator formula:
//! expanding E[(X_t−X̄)'(X_{t+h}−X̄)] termwise, folding negative lags onto
//! positive ones via tr Γ(−k) = tr Γ(k), and truncating |lag| > M gives a
//! closed form validated against exact enumeration and Monte Carlo
//! expectation oracles.

use ndarray::{Array1, Array2};

use crate::autocov::TraceAutocovVector;
use crate::error::{Error, Result};
use crate::numeric::solve_dense;

fn check_order(n: usize, m: usize) -> Result<()> {
    if m + 2 > n {
        return Err(Error::dim(format!("lag order M={m} needs n >= M+2, got n={n}")));
    }
    Ok(())
}

/// Number of pairs (t,s) with 1 ≤ t ≤ n−h, 1 ≤ s ≤ n and |t − s| = j.
/// The count for |t + h − s| = j is identical by time reversal.
fn lag_pair_count(n: usize, h: usize, j: usize) -> f64 {
    if j == 0 {
        return (n - h) as f64;
    }
    let forward = (n - h.max(j)) as f64;
    let backward = (n as i64 - h as i64 - j as i64).max(0) as f64;
    forward + backward
}

/// The (M+1)×(M+1) matrix Θ_n with E[γ̂] = Θ_n γ for any mean-μ M-dependent
/// stationary process; entry (h,j) is the exact coefficient of tr Γ(j) in
/// E[tr Γ̂(h)].
///
/// Closed form (0-based h, j):
/// Θ[h,j] = (1 − h/n)·1[j=h] − (2/n²)·N(h,j) + (n−h)·c_j/n³
/// with N(h,0) = n−h, N(h,j≥1) = (n − max(h,j)) + max(0, n−h−j),
/// c_0 = n, c_j = 2(n−j). The M=0 case reduces to the classical iid bias
/// (n−1)/n.
pub fn theta_matrix(n: usize, m: usize) -> Result<Array2<f64>> {
    check_order(n, m)?;
    let nf = n as f64;
    let mut theta = Array2::<f64>::zeros((m + 1, m + 1));
    for h in 0..=m {
        let rows = (n - h) as f64;
        for j in 0..=m {
            let diag = if j == h { 1.0 - h as f64 / nf } else { 0.0 };
            let cj = if j == 0 { nf } else { 2.0 * (n - j) as f64 };
            theta[[h, j]] = diag - 2.0 * lag_pair_count(n, h, j) / (nf * nf)
                + rows * cj / (nf * nf * nf);
        }
    }
    Ok(theta)
}

/// Weights with b'γ = tr(Ω_n) = tr Γ(0) + 2·Σ_{h=1}^{M} (1 − h/n)·tr Γ(h):
/// b(0) = 1 and b(h) = 2(1 − h/n) for h ≥ 1.
pub fn b_vector(n: usize, m: usize) -> Result<Array1<f64>> {
    check_order(n, m)?;
    let nf = n as f64;
    Ok(Array1::from_shape_fn(m + 1, |h| {
        if h == 0 {
            1.0
        } else {
            2.0 * (1.0 - h as f64 / nf)
        }
    }))
}

/// Θ_n, b, the solved β, and χ_n for a given (n, M).
#[derive(Debug, Clone)]
pub struct DebiasSystem {
    pub n: usize,
    pub m: usize,
    pub theta: Array2<f64>,
    pub b: Array1<f64>,
    /// Solution of Θ_n'β = b, so that β'γ̂ is exactly unbiased for tr(Ω_n).
    pub beta: Array1<f64>,
    /// χ_n = (1/n)·Σ_{h=1}^{M} (1 − h/n)².
    pub chi_n: f64,
}

/// χ_n = (1/n)·Σ_{h=1}^{M} (1 − h/n)²; zero when M = 0.
pub(crate) fn chi_n(n: usize, m: usize) -> f64 {
    let nf = n as f64;
    (1..=m)
        .map(|h| {
            let w = 1.0 - h as f64 / nf;
            w * w
        })
        .sum::<f64>()
        / nf
}

/// Assembles Θ_n and b, solves Θ_n'β = b by dense LU with partial
/// pivoting, and computes χ_n.
pub fn debias_system(n: usize, m: usize) -> Result<DebiasSystem> {
    let theta = theta_matrix(n, m)?;
    let b = b_vector(n, m)?;
    let beta_vec = solve_dense(&theta.t().to_owned(), b.as_slice().unwrap())?;
    let beta = Array1::from_vec(beta_vec);
    let residual = (0..=m)
        .map(|j| {
            let lhs: f64 = (0..=m).map(|h| theta[[h, j]] * beta[h]).sum();
            (lhs - b[j]).abs()
        })
        .fold(0.0f64, f64::max);
    if residual >= 1e-10 {
        return Err(Error::SingularSystem {
            context: format!("debias solve residual {residual:.3e} >= 1e-10 for n={n}, M={m}"),
        });
    }
    Ok(DebiasSystem { n, m, theta, b, beta, chi_n: chi_n(n, m) })
}

/// The exactly unbiased estimator tr̂(Ω_n) = β'γ̂.
pub fn tr_omega_hat(gamma_hat: &TraceAutocovVector, sys: &DebiasSystem) -> Result<f64> {
    if gamma_hat.n != sys.n || gamma_hat.m != sys.m {
        return Err(Error::config(format!(
            "trace vector is for (n={}, M={}) but system is for (n={}, M={})",
            gamma_hat.n, gamma_hat.m, sys.n, sys.m
        )));
    }
    Ok(sys.beta.dot(&gamma_hat.gamma_hat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_m0_is_classical_iid_bias() {
        for n in [2usize, 5, 17, 100] {
            let theta = theta_matrix(n, 0).unwrap();
            let expect = (n as f64 - 1.0) / n as f64;
            assert!((theta[[0, 0]] - expect).abs() < 1e-15, "n={n}");
        }
    }

    /// Coefficient matrix computed by brute-force expansion of
    /// E[tr Γ̂(h)] = (1/n)·Σ_t E[(X_t−X̄)'(X_{t+h}−X̄)] over all index
    /// tuples, truncating lags beyond M. O(n³) — oracle only.
    fn theta_by_enumeration(n: usize, m: usize) -> Array2<f64> {
        let nf = n as f64;
        let mut theta = Array2::<f64>::zeros((m + 1, m + 1));
        for h in 0..=m {
            let mut coeff = vec![0.0f64; m + 1];
            for t in 1..=(n - h) {
                // + tr Γ(h)
                coeff[h] += 1.0;
                // − (1/n) Σ_s tr Γ(|t+h−s|) − (1/n) Σ_s tr Γ(|s−t|)
                for s in 1..=n {
                    let l1 = (t as i64 + h as i64 - s as i64).unsigned_abs() as usize;
                    if l1 <= m {
                        coeff[l1] -= 1.0 / nf;
                    }
                    let l2 = (s as i64 - t as i64).unsigned_abs() as usize;
                    if l2 <= m {
                        coeff[l2] -= 1.0 / nf;
                    }
                }
                // + (1/n²) Σ_{s,s'} tr Γ(|s−s'|)
                for s in 1..=n {
                    for s2 in 1..=n {
                        let l = (s as i64 - s2 as i64).unsigned_abs() as usize;
                        if l <= m {
                            coeff[l] += 1.0 / (nf * nf);
                        }
                    }
                }
            }
            for j in 0..=m {
                theta[[h, j]] = coeff[j] / nf;
            }
        }
        theta
    }

    #[test]
    fn theta_matches_enumeration_oracle() {
        for (n, m) in [(4usize, 1usize), (6, 2), (9, 3), (12, 0)] {
            let fast = theta_matrix(n, m).unwrap();
            let slow = theta_by_enumeration(n, m);
            for h in 0..=m {
                for j in 0..=m {
                    assert!(
                        (fast[[h, j]] - slow[[h, j]]).abs() < 1e-12,
                        "n={n} M={m} entry ({h},{j}): {} vs {}",
                        fast[[h, j]],
                        slow[[h, j]]
                    );
                }
            }
        }
    }

    #[test]
    fn theta_approaches_identity_monotonically() {
        for m in [1usize, 2, 3] {
            let mut last = f64::INFINITY;
            for n in [50usize, 100, 200, 400] {
                let theta = theta_matrix(n, m).unwrap();
                let mut dev = 0.0f64;
                for h in 0..=m {
                    for j in 0..=m {
                        let id = if h == j { 1.0 } else { 0.0 };
                        dev = dev.max((theta[[h, j]] - id).abs());
                    }
                }
                assert!(dev <= last, "M={m}: deviation grew from {last} to {dev} at n={n}");
                last = dev;
            }
        }
    }

    #[test]
    fn b_vector_examples() {
        assert_eq!(b_vector(7, 0).unwrap(), ndarray::arr1(&[1.0]));
        assert_eq!(b_vector(10, 1).unwrap(), ndarray::arr1(&[1.0, 1.8]));
    }

    #[test]
    fn b_contracts_omega_for_diagonal_toy_process() {
        // Toy traces tr Γ(h) = 4, 2, 1: b'γ must equal the direct sum
        // Σ_{h=−M}^{M} (1 − |h|/n)·tr Γ(|h|).
        let (n, m) = (12usize, 2usize);
        let traces = [4.0, 2.0, 1.0];
        let b = b_vector(n, m).unwrap();
        let via_b: f64 = (0..=m).map(|h| b[h] * traces[h]).sum();
        let mut direct = 0.0;
        for h in -(m as i64)..=(m as i64) {
            direct += (1.0 - h.unsigned_abs() as f64 / n as f64) * traces[h.unsigned_abs() as usize];
        }
        assert!((via_b - direct).abs() < 1e-12);
    }

    #[test]
    fn debias_system_m0_beta_is_scalar_inverse() {
        let sys = debias_system(25, 0).unwrap();
        assert!((sys.beta[0] - 25.0 / 24.0).abs() < 1e-14);
        assert_eq!(sys.chi_n, 0.0);
    }

    #[test]
    fn debias_system_chi_example() {
        let sys = debias_system(10, 1).unwrap();
        assert!((sys.chi_n - 0.081).abs() < 1e-15);
    }

    #[test]
    fn debias_solve_residual_small() {
        for (n, m) in [(40usize, 3usize), (100, 5), (10_000, 10), (20, 7)] {
            let sys = debias_system(n, m).unwrap();
            let mut residual = 0.0f64;
            for j in 0..=m {
                let lhs: f64 = (0..=m).map(|h| sys.theta[[h, j]] * sys.beta[h]).sum();
                residual = residual.max((lhs - sys.b[j]).abs());
            }
            assert!(residual < 1e-10, "n={n} M={m}: residual {residual}");
        }
    }

    #[test]
    fn chi_bounds() {
        for (n, m) in [(10usize, 3usize), (50, 5), (100, 0)] {
            let sys = debias_system(n, m).unwrap();
            assert!(sys.chi_n >= 0.0 && sys.chi_n <= m as f64 / n as f64);
        }
    }

    #[test]
    fn tr_omega_hat_zero_for_constant_data() {
        let x = crate::io::ObservationMatrix::new(ndarray::Array2::from_elem((8, 3), 2.0)).unwrap();
        let sys = debias_system(8, 1).unwrap();
        let gh = crate::autocov::trace_autocov(&x, 1).unwrap();
        assert_eq!(tr_omega_hat(&gh, &sys).unwrap(), 0.0);
    }

    #[test]
    fn tr_omega_hat_m0_is_unbiased_variance_trace() {
        // For M=0, β'γ̂ = (n/(n−1))·tr Γ̂(0).
        let mut stream = crate::numeric::RngStream::new(3, 2, 0);
        let vals = ndarray::Array2::from_shape_fn((20, 5), |_| stream.next_gaussian());
        let x = crate::io::ObservationMatrix::new(vals).unwrap();
        let sys = debias_system(20, 0).unwrap();
        let gh = crate::autocov::trace_autocov(&x, 0).unwrap();
        let got = tr_omega_hat(&gh, &sys).unwrap();
        let expect = 20.0 / 19.0 * gh.gamma_hat[0];
        assert!((got - expect).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn tr_omega_hat_rejects_mismatched_system() {
        let x = crate::io::ObservationMatrix::new(ndarray::Array2::from_elem((8, 3), 1.0)).unwrap();
        let gh = crate::autocov::trace_autocov(&x, 1).unwrap();
        let sys = debias_system(9, 1).unwrap();
        assert!(matches!(tr_omega_hat(&gh, &sys), Err(Error::Config { .. })));
    }
}
