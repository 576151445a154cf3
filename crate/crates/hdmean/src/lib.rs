//! Mean-vector testing for high-dimensional observations with short-range
//! serial dependence.
//!
//! The observations `X_1, …, X_n` are p-dimensional rows of an
//! [`io::ObservationMatrix`], assumed stationary and M-dependent: `X_t` and
//! `X_s` are independent whenever `|t − s| > M`. The test statistic compares
//! `‖X̄‖²` against an exactly unbiased estimate of `tr(Ω_n)/n`, where
//! `Ω_n = n·Cov(X̄) = Σ_{|h|≤M} (1 − |h|/n) Γ(h)`, and studentizes by a
//! ratio-consistent variance estimate built from gapped trace-product
//! estimators. Both one- and two-sample versions are provided, plus the
//! classical independence-assuming baseline statistic for contrast.
//!
//! Module map:
//! - [`io`]: observation matrices and CSV interchange.
//! - [`autocov`]: sample mean, Gram matrix, autocovariance traces γ̂.
//! - [`debias`]: the Θ_n system mapping E[γ̂] to γ and the unbiased tr̂(Ω_n).
//! - [`variance`]: ξ weights, gapped index sets, trace-product estimators, V̂.
//! - [`stat`]: assembled test statistics, p-values, power predictions.
//! - [`simgen`]: factor-model generator with exact autocovariance oracles.
//! - [`numeric`]: normal CDF/quantile, Cholesky, deterministic RNG streams.

pub mod autocov;
pub mod debias;
pub mod error;
pub mod io;
pub mod numeric;
pub mod simgen;
pub mod stat;
pub mod variance;

pub use error::{Error, Result};
