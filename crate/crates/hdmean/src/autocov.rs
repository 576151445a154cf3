//! Sample mean, Gram matrix, and the autocovariance-trace vector γ̂ that
//! every downstream estimator consumes.
//!
//! Full p×p autocovariance matrices are never materialized: the statistics
//! need only traces and inner products X_t'X_s, so memory stays at
//! O(n² + np) even when p ≫ n.

use ndarray::{linalg::general_mat_mul, Array1, Array2};

use crate::error::{Error, Result};
use crate::io::ObservationMatrix;

/// Gram matrix of the observations plus the row/total sums used by the
/// local-mean functionals.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    /// g[t,s] = X_t'X_s, exactly symmetric (upper triangle computed once
    /// and mirrored).
    pub g: Array2<f64>,
    /// row_sums[t] = Σ_s g[t,s].
    pub row_sums: Array1<f64>,
    /// Σ_{t,s} g[t,s].
    pub total: f64,
}

/// Component j is (1/n)·Σ_t X[t,j].
pub fn sample_mean(x: &ObservationMatrix) -> Array1<f64> {
    let n = x.n() as f64;
    let mut mean = Array1::<f64>::zeros(x.p());
    for row in x.values().rows() {
        mean += &row;
    }
    mean.mapv_inplace(|v| v / n);
    mean
}

/// All pairwise inner products g[t,s] = X_t'X_s with row sums and total.
pub fn gram(x: &ObservationMatrix) -> GramMatrix {
    let n = x.n();
    let mut g = Array2::<f64>::zeros((n, n));
    general_mat_mul(1.0, x.values(), &x.values().t(), 0.0, &mut g);
    // Mirror the upper triangle so symmetry holds exactly, not merely up to
    // the kernel's summation order.
    for t in 0..n {
        for s in (t + 1)..n {
            let v = g[[t, s]];
            g[[s, t]] = v;
        }
    }
    let row_sums: Array1<f64> = g.rows().into_iter().map(|r| r.sum()).collect();
    let total = row_sums.sum();
    GramMatrix { g, row_sums, total }
}

/// The traces tr Γ̂(0), …, tr Γ̂(M) of the biased sample autocovariances,
/// all centered at the global mean X̄.
#[derive(Debug, Clone)]
pub struct TraceAutocovVector {
    /// Entry h is tr Γ̂(h) = (1/n)·Σ_{t=1}^{n−h} (X_t−X̄)'(X_{t+h}−X̄).
    pub gamma_hat: Array1<f64>,
    pub n: usize,
    pub m: usize,
}

fn check_lag_order(n: usize, m: usize) -> Result<()> {
    if m + 2 > n {
        return Err(Error::dim(format!(
            "lag order M={m} needs n >= M+2 observations, got n={n}"
        )));
    }
    Ok(())
}

/// γ̂ computed from centered rows in O(n·(M+1)·p).
pub fn trace_autocov(x: &ObservationMatrix, m: usize) -> Result<TraceAutocovVector> {
    let n = x.n();
    check_lag_order(n, m)?;
    let mean = sample_mean(x);
    let centered = x.values() - &mean;
    let mut gamma_hat = Array1::<f64>::zeros(m + 1);
    for h in 0..=m {
        let mut acc = 0.0;
        for t in 0..(n - h) {
            acc += centered.row(t).dot(&centered.row(t + h));
        }
        gamma_hat[h] = acc / n as f64;
    }
    Ok(TraceAutocovVector { gamma_hat, n, m })
}

/// γ̂ computed from an existing Gram matrix in O(n·(M+1)).
///
/// The centered Gram entry is
/// gc(t,s) = g[t,s] − (row_sums[t] + row_sums[s])/n + total/n², and
/// tr Γ̂(h) = (1/n)·Σ_t gc(t, t+h). Equals [`trace_autocov`] to 1e-10
/// relative.
pub fn trace_autocov_from_gram(gm: &GramMatrix, m: usize) -> Result<TraceAutocovVector> {
    let n = gm.g.nrows();
    check_lag_order(n, m)?;
    let nf = n as f64;
    let mean_total = gm.total / (nf * nf);
    let mut gamma_hat = Array1::<f64>::zeros(m + 1);
    for h in 0..=m {
        let mut acc = 0.0;
        for t in 0..(n - h) {
            acc += gm.g[[t, t + h]] - (gm.row_sums[t] + gm.row_sums[t + h]) / nf + mean_total;
        }
        gamma_hat[h] = acc / nf;
    }
    Ok(TraceAutocovVector { gamma_hat, n, m })
}
