//! The mean tests themselves: the debiased one- and two-sample statistics
//! with studentizing variance, the independence-assuming baseline
//! statistic, one-sided p-values and decisions, and the asymptotic power
//! predictions.
//!
//! Everything is assembled from Gram-matrix functionals computed once per
//! input sample; no p×p matrix is ever materialized.

use crate::autocov::{gram, sample_mean, trace_autocov, trace_autocov_from_gram};
use crate::debias::{debias_system, tr_omega_hat, DebiasSystem};
use crate::error::{Error, Result};
use crate::io::ObservationMatrix;
use crate::numeric::{normal_cdf, normal_quantile};
use crate::variance::{
    cross_trace_table, trace_product_table_from_gram, variance_estimate, xi_weights,
    TraceProductTable,
};

/// Numerical side information attached to every test result.
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    /// tr̂(Ω_n) for the (first) sample; for the baseline statistic this
    /// carries the plug-in tr S instead.
    pub tr_omega_hat: f64,
    /// Second-sample tr̂(Ω_n) (two-sample only).
    pub tr_omega_hat_2: Option<f64>,
    /// χ_n of the (first) sample; zero for the baseline.
    pub chi_n: f64,
    /// Second-sample χ_n (two-sample only).
    pub chi_n_2: Option<f64>,
    /// Smallest pair count n_{a,b} over every trace-product grid used.
    pub min_pair_count: u64,
    /// Times a computed probability had to be clamped back into [0,1].
    pub clamp_events: u32,
}

/// Outcome of a mean test: numerator M_n, variance estimate V̂, the
/// studentized statistic, the one-sided p-value, and the decision at α.
#[derive(Debug, Clone, Copy)]
pub struct TestResult {
    pub numerator: f64,
    pub variance: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub diagnostics: Diagnostics,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("alpha must lie in (0,1), got {alpha}")));
    }
    Ok(())
}

/// Studentizes the numerator, maps to a one-sided p-value, and decides.
/// The test is one-sided by design: the mean enters the numerator only
/// through ‖μ‖², so the alternative pushes the statistic upward.
fn assemble(numerator: f64, variance: f64, alpha: f64, mut diag: Diagnostics) -> Result<TestResult> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::degenerate(format!(
            "variance estimate {variance:.6e} is not positive; statistic undefined"
        )));
    }
    let statistic = numerator / variance.sqrt();
    let mut p_value = 1.0 - normal_cdf(statistic)?;
    if !(0.0..=1.0).contains(&p_value) {
        p_value = p_value.clamp(0.0, 1.0);
        diag.clamp_events += 1;
    }
    Ok(TestResult {
        numerator,
        variance,
        statistic,
        p_value,
        reject: p_value < alpha,
        alpha,
        diagnostics: diag,
    })
}

/// The debiased numerator M_n = X̄'X̄ − tr̂(Ω_n)/n, exactly mean-‖μ‖² for
/// any M-dependent stationary process matching the system's (n, M).
pub fn m_statistic(x: &ObservationMatrix, sys: &DebiasSystem) -> Result<f64> {
    if x.n() != sys.n {
        return Err(Error::config(format!(
            "observation matrix has n={} but the debias system was built for n={}",
            x.n(),
            sys.n
        )));
    }
    let gamma = trace_autocov(x, sys.m)?;
    let tr_om = tr_omega_hat(&gamma, sys)?;
    let mean = sample_mean(x);
    Ok(mean.dot(&mean) - tr_om / x.n() as f64)
}

struct SampleParts {
    mean: ndarray::Array1<f64>,
    tr_om: f64,
    table: TraceProductTable,
    own_variance: f64,
    chi: f64,
}

/// Per-sample ingredients shared by the one- and two-sample statistics,
/// all derived from a single Gram matrix.
fn sample_parts(x: &ObservationMatrix, m: usize) -> Result<SampleParts> {
    let n = x.n();
    let gm = gram(x);
    let gamma = trace_autocov_from_gram(&gm, m)?;
    let sys = debias_system(n, m)?;
    let tr_om = tr_omega_hat(&gamma, &sys)?;
    let table = trace_product_table_from_gram(&gm, m)?;
    let xi = xi_weights(n, m, true)?;
    let own_variance = variance_estimate(&table, &xi)?;
    Ok(SampleParts { mean: sample_mean(x), tr_om, table, own_variance, chi: sys.chi_n })
}

/// One-sample test of H0: μ = 0 for an M-dependent stationary sample.
///
/// Statistic: T = M_n/√V̂ with M_n the debiased squared-mean estimate and
/// V̂ the gapped trace-product variance estimate; p-value 1 − Φ(T).
pub fn test_one_sample(x: &ObservationMatrix, m: usize, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let parts = sample_parts(x, m)?;
    let n = x.n() as f64;
    let numerator = parts.mean.dot(&parts.mean) - parts.tr_om / n;
    let diag = Diagnostics {
        tr_omega_hat: parts.tr_om,
        tr_omega_hat_2: None,
        chi_n: parts.chi,
        chi_n_2: None,
        min_pair_count: parts.table.min_count(),
        clamp_events: 0,
    };
    assemble(numerator, parts.own_variance, alpha, diag)
}

/// Paired input for the two-sample test: both samples share the dimension
/// p and the specified lag order M, and each is long enough for the gapped
/// variance machinery.
#[derive(Debug, Clone)]
pub struct TwoSampleInput {
    pub x1: ObservationMatrix,
    pub x2: ObservationMatrix,
    pub m: usize,
}

impl TwoSampleInput {
    pub fn new(x1: ObservationMatrix, x2: ObservationMatrix, m: usize) -> Result<Self> {
        if x1.p() != x2.p() {
            return Err(Error::dim(format!(
                "samples disagree in dimension: p1={}, p2={}",
                x1.p(),
                x2.p()
            )));
        }
        let need = 4 * (m + 1) + 2;
        for (name, n) in [("first", x1.n()), ("second", x2.n())] {
            if n < need {
                return Err(Error::dim(format!(
                    "{name} sample needs n >= 4(M+1)+2 = {need} for M={m}, got n={n}"
                )));
            }
        }
        Ok(TwoSampleInput { x1, x2, m })
    }
}

/// Two-sample test of H0: μ⁽¹⁾ = μ⁽²⁾ for independent M-dependent samples.
///
/// Numerator: M_n = ‖X̄⁽¹⁾−X̄⁽²⁾‖² − (tr̂Ω⁽¹⁾/n₁ + tr̂Ω⁽²⁾/n₂), which splits
/// into two independent one-sample numerators minus twice the
/// cross-sample mean product. Variance: the two own-sample estimates plus
/// (4/(n₁n₂))·Σ_{a,b}(1−|a|/n₁)(1−|b|/n₂)·tr̂(Γ⁽¹⁾(a)Γ⁽²⁾(b)) for the
/// cross term.
pub fn test_two_sample(input: &TwoSampleInput, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let m = input.m;
    let p1 = sample_parts(&input.x1, m)?;
    let p2 = sample_parts(&input.x2, m)?;
    let (n1, n2) = (input.x1.n() as f64, input.x2.n() as f64);
    let d = &p1.mean - &p2.mean;
    let numerator = d.dot(&d) - (p1.tr_om / n1 + p2.tr_om / n2);

    let cross = cross_trace_table(&input.x1, &input.x2, m)?;
    let mi = m as i64;
    let mut cross_sum = 0.0;
    for a in -mi..=mi {
        let wa = 1.0 - a.unsigned_abs() as f64 / n1;
        for b in -mi..=mi {
            let wb = 1.0 - b.unsigned_abs() as f64 / n2;
            cross_sum += wa * wb * cross.at(a, b);
        }
    }
    let variance = p1.own_variance + p2.own_variance + 4.0 / (n1 * n2) * cross_sum;

    let diag = Diagnostics {
        tr_omega_hat: p1.tr_om,
        tr_omega_hat_2: Some(p2.tr_om),
        chi_n: p1.chi,
        chi_n_2: Some(p2.chi),
        min_pair_count: p1
            .table
            .min_count()
            .min(p2.table.min_count())
            .min(cross.min_count()),
        clamp_events: 0,
    };
    assemble(numerator, variance, alpha, diag)
}

/// Baseline statistic assuming independent observations:
/// T = (n·X̄'X̄ − tr S)/√{(2n(n−1)/((n−2)(n+1)))·(tr S² − tr²S/(n−1))}
/// with S the sample covariance. tr S and tr S² are read off the centered
/// Gram matrix G_c: tr S = tr G_c/(n−1) and tr S² = ‖G_c‖²_F/(n−1)².
pub fn test_bs(x: &ObservationMatrix, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    let n = x.n();
    if n < 4 {
        return Err(Error::dim(format!("baseline statistic needs n >= 4, got n={n}")));
    }
    let nf = n as f64;
    let gm = gram(x);
    let mut tr_gc = 0.0;
    let mut frob_sq = 0.0;
    for t in 0..n {
        for s in 0..n {
            let gc = gm.g[[t, s]] - (gm.row_sums[t] + gm.row_sums[s]) / nf
                + gm.total / (nf * nf);
            if t == s {
                tr_gc += gc;
            }
            frob_sq += gc * gc;
        }
    }
    let tr_s = tr_gc / (nf - 1.0);
    let tr_s_sq = frob_sq / ((nf - 1.0) * (nf - 1.0));
    let factor = 2.0 * nf * (nf - 1.0) / ((nf - 2.0) * (nf + 1.0));
    let variance = factor * (tr_s_sq - tr_s * tr_s / (nf - 1.0));
    let mean = sample_mean(x);
    let numerator = nf * mean.dot(&mean) - tr_s;
    let diag = Diagnostics {
        tr_omega_hat: tr_s,
        tr_omega_hat_2: None,
        chi_n: 0.0,
        chi_n_2: None,
        min_pair_count: 0,
        clamp_events: 0,
    };
    assemble(numerator, variance, alpha, diag)
}

/// Asymptotic power prediction for the one-sample test:
/// Φ(−z_α + n·‖μ‖²/√(2·tr(Ω_n²))).
pub fn theoretical_power(
    mu_norm_sq: f64,
    tr_omega_sq: f64,
    n: usize,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !(tr_omega_sq > 0.0) || n == 0 {
        return Err(Error::config(format!(
            "power prediction needs tr(Ω²) > 0 and n >= 1, got tr(Ω²)={tr_omega_sq}, n={n}"
        )));
    }
    let z = normal_quantile(1.0 - alpha)?;
    normal_cdf(-z + n as f64 * mu_norm_sq / (2.0 * tr_omega_sq).sqrt())
}

/// Asymptotic power prediction for the two-sample test:
/// Φ(−z_α + ‖δ‖²/√(2·tr[(Ω⁽¹⁾/n₁ + Ω⁽²⁾/n₂)²])) with δ the mean difference;
/// the caller supplies the combined squared trace.
pub fn theoretical_power_two_sample(
    delta_norm_sq: f64,
    tr_omega_combined_sq: f64,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    if !(tr_omega_combined_sq > 0.0) {
        return Err(Error::config(format!(
            "power prediction needs tr[(Ω⁽¹⁾/n₁+Ω⁽²⁾/n₂)²] > 0, got {tr_omega_combined_sq}"
        )));
    }
    let z = normal_quantile(1.0 - alpha)?;
    normal_cdf(-z + delta_norm_sq / (2.0 * tr_omega_combined_sq).sqrt())
}
