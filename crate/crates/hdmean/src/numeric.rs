//! Scalar numeric kernels: standard normal CDF/quantile, Cholesky
//! factorization, and deterministic Gaussian RNG streams.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Inputs beyond this magnitude saturate the normal CDF to 0 or 1; the
/// stated accuracy domain is [−8, 8] and Φ(−8.5) ≈ 9.5e-18 is far below the
/// absolute error budget.
const CDF_SATURATION: f64 = 8.5;

/// Standard normal CDF with absolute error ≤ 1e-10 on [−8, 8] (measured
/// ~1e-14), clamped to [0, 1].
///
/// Evaluates the positive-term series
/// `Φ(x) = 1/2 + φ(x)·Σ_{k≥0} x^{2k+1} / (1·3···(2k+1))`,
/// which has no cancellation; beyond ±8.5 the result saturates.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("normal_cdf: NaN input"));
    }
    Ok(cdf_core(x))
}

/// Series evaluation of Φ for finite non-NaN input.
fn cdf_core(x: f64) -> f64 {
    if x >= CDF_SATURATION {
        return 1.0;
    }
    if x <= -CDF_SATURATION {
        return 0.0;
    }
    let x2 = x * x;
    let ax = x.abs();
    let mut term = ax;
    let mut sum = ax;
    let mut k = 1u32;
    // Terms grow until 2k+1 > x², then decay geometrically; 400 iterations
    // is far past convergence at |x| = 8.5.
    while term > sum * 1e-17 && k < 400 {
        term *= x2 / f64::from(2 * k + 1);
        sum += term;
        k += 1;
    }
    let pdf = (-0.5 * x2).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let half = pdf * sum;
    let p = if x >= 0.0 { 0.5 + half } else { 0.5 - half };
    p.clamp(0.0, 1.0)
}

/// Standard normal density.
fn pdf_core(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile: returns x with |Φ(x) − q| ≤ 1e-8 (measured
/// ~1e-13; the residual is limited only by the CDF's own absolute error).
///
/// Safeguarded Newton iteration on [`normal_cdf`] with a bisection fallback;
/// accuracy is stated in probability space, so extreme tail quantiles
/// (q below Φ(−8.5) ≈ 1e-17) resolve to the saturation boundary.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!(
            "normal_quantile: q must lie in (0,1), got {q}"
        )));
    }
    // Solve on the lower half and mirror: keeps the 1 − q cancellation out
    // of the iteration (the residual is measured against the reduced ql).
    let (ql, mirror) = if q > 0.5 { (1.0 - q, true) } else { (q, false) };
    let x = quantile_lower(ql);
    Ok(if mirror { -x } else { x })
}

/// Root of Φ(x) = ql for 0 < ql ≤ 1/2 (so x ≤ 0).
fn quantile_lower(ql: f64) -> f64 {
    if ql == 0.5 {
        return 0.0;
    }
    let mut lo = -(CDF_SATURATION + 1.0);
    let mut hi = 0.0;
    // Crude starts: the uniform-tail asymptote below 0.3, a linear expansion
    // around 0 otherwise. Newton does the rest.
    let mut x = if ql < 0.3 {
        -(-2.0 * ql.ln()).sqrt()
    } else {
        (ql - 0.5) / pdf_core(0.0)
    };
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = cdf_core(x) - ql;
        if f.abs() <= 1e-14 {
            break;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = pdf_core(x);
        let next = x - f / d;
        x = if d > 0.0 && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Lower-triangular Cholesky factor L with LL' = S.
///
/// `S` must be symmetric to 1e-12 relative; a non-positive pivot fails fast
/// with the 1-based index of the offending leading minor. Reconstruction
/// satisfies ‖LL' − S‖_max ≤ 1e-9·‖S‖_max for well-conditioned inputs.
pub fn cholesky(s: &Array2<f64>) -> Result<Array2<f64>> {
    let k = s.nrows();
    if s.ncols() != k {
        return Err(Error::dim(format!(
            "cholesky: matrix must be square, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..k {
        for j in (i + 1)..k {
            if (s[[i, j]] - s[[j, i]]).abs() > 1e-12 * scale.max(1e-300) {
                return Err(Error::domain(format!(
                    "cholesky: matrix not symmetric at ({i},{j})"
                )));
            }
        }
    }
    let mut l = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        for j in 0..=i {
            let mut acc = s[[i, j]];
            for r in 0..j {
                acc -= l[[i, r]] * l[[j, r]];
            }
            if i == j {
                if !(acc > 0.0) {
                    return Err(Error::NotPositiveDefinite { minor: i + 1 });
                }
                l[[i, i]] = acc.sqrt();
            } else {
                l[[i, j]] = acc / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solve the dense square system `A x = rhs` by LU with partial pivoting.
///
/// Used for the (M+1)-sized debiasing solve; pivots below 1e-12·‖A‖_max are
/// treated as singular.
pub fn solve_dense(a: &Array2<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let k = a.nrows();
    if a.ncols() != k || rhs.len() != k {
        return Err(Error::dim(format!(
            "solve_dense: shape mismatch ({}x{} vs rhs {})",
            a.nrows(),
            a.ncols(),
            rhs.len()
        )));
    }
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(1e-300);
    let mut lu = a.clone();
    let mut x: Vec<f64> = rhs.to_vec();
    for col in 0..k {
        let mut piv = col;
        for r in (col + 1)..k {
            if lu[[r, col]].abs() > lu[[piv, col]].abs() {
                piv = r;
            }
        }
        if lu[[piv, col]].abs() < tol {
            return Err(Error::SingularSystem {
                context: format!("pivot {:.3e} below tolerance at column {col}", lu[[piv, col]]),
            });
        }
        if piv != col {
            for c in 0..k {
                lu.swap([col, c], [piv, c]);
            }
            x.swap(col, piv);
        }
        for r in (col + 1)..k {
            let f = lu[[r, col]] / lu[[col, col]];
            lu[[r, col]] = f;
            for c in (col + 1)..k {
                lu[[r, c]] -= f * lu[[col, c]];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..k).rev() {
        x[col] /= lu[[col, col]];
        for r in 0..col {
            x[r] -= lu[[r, col]] * x[col];
        }
    }
    Ok(x)
}

/// Deterministic Gaussian RNG stream keyed by (seed, domain, index).
///
/// Distinct keys yield statistically independent streams; identical keys
/// reproduce identical sequences regardless of execution order, which is
/// what makes parallel Monte Carlo replicates reproducible. The generator
/// is ChaCha8 keyed by a splitmix64-style absorption of the key triple;
/// normal variates use the paired Box–Muller transform of two uniform
/// draws. Both constructions are fixed: outputs are stable across releases.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: (u64, u64, u64),
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

/// splitmix64 finalizer: a bijective 64-bit mix.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

impl RngStream {
    /// Stream for `domain` (a stable scenario ordinal) and `index`
    /// (typically the replicate number) under `seed`.
    pub fn new(seed: u64, domain: u64, index: u64) -> Self {
        let mut state: u64 = 0x243F_6A88_85A3_08D3;
        for word in [seed, domain, index] {
            state = mix64(state.wrapping_add(GOLDEN).wrapping_add(word));
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(GOLDEN);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        RngStream { key: (seed, domain, index), rng: ChaCha8Rng::from_seed(key), spare: None }
    }

    /// The (seed, domain, index) triple this stream was keyed with.
    pub fn key(&self) -> (u64, u64, u64) {
        self.key
    }

    /// Raw 64-bit draw.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in [0, 1) with 53-bit resolution.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn next_uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_uniform()
    }

    /// Standard normal draw (Box–Muller pair; the second variate of each
    /// pair is cached, so consumption parity affects only internal state,
    /// never the emitted sequence).
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 ∈ (0, 1] keeps the log finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Fill `out` with standard normal draws.
    pub fn fill_gaussian(&mut self, out: &mut [f64]) {
        for slot in out {
            *slot = self.next_gaussian();
        }
    }
}

/// `count` iid standard normal draws from `stream`.
pub fn gaussian_draws(stream: &mut RngStream, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    stream.fill_gaussian(&mut out);
    out
}
