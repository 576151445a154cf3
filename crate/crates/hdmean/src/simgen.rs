//! Factor-model data generation for the simulation studies: banded mixing
//! matrices, banded innovation covariances, the four-model catalog and the
//! two-sample configuration, exact autocovariance oracles (Γ(h), tr Ω_n,
//! tr Ω_n², cross products), mean scenarios, and exactly stationary sample
//! generation.
//!
//! The process is X_t = μ + Σ_{h=0}^{M} A_h ε_{t−h} with ε_t = L z_t,
//! z_t iid standard normal and Σ = LL'. Exactly M extra innovation rows
//! are drawn before the first observation, so the output is stationary
//! from the first row, not merely asymptotically.

use ndarray::{linalg::general_mat_mul, s, Array1, Array2};

use crate::error::{Error, Result};
use crate::io::ObservationMatrix;
use crate::numeric::{cholesky, gaussian_draws, RngStream};

/// Lag profile c(h) of the mixing matrices: entries decay as 1/(h+1) for
/// the first two catalog models and grow as (h+1) for the last two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingVariant {
    ReciprocalH,
    LinearH,
}

impl MixingVariant {
    fn lag_factor(self, h: usize) -> f64 {
        match self {
            MixingVariant::ReciprocalH => 1.0 / (h as f64 + 1.0),
            MixingVariant::LinearH => h as f64 + 1.0,
        }
    }
}

/// Banded mixing matrices A_0..A_M, each p×m with reciprocal-square decay
/// away from the diagonal: A_h(i,j) = c(h)·φ₁/max(1, |i−j|²) for
/// |i−j| ≤ p·w and 0 beyond the band. The lag factor c(h) is 1/(h+1) for
/// the reciprocal variant and (h+1) for the linear variant; the h+1 shift
/// and the max(1,·) guard keep every entry finite and A_0 nonzero.
pub fn build_mixing(
    p: usize,
    m: usize,
    m_order: usize,
    phi1: f64,
    w: f64,
    variant: MixingVariant,
) -> Result<Vec<Array2<f64>>> {
    if m <= p {
        return Err(Error::config(format!(
            "factor dimension must exceed p: got m={m}, p={p}"
        )));
    }
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::config(format!("bandwidth fraction must lie in (0,1], got {w}")));
    }
    let band = p as f64 * w;
    Ok((0..=m_order)
        .map(|h| {
            let c = variant.lag_factor(h);
            Array2::from_shape_fn((p, m), |(i, j)| {
                let d = i.abs_diff(j);
                if d as f64 <= band {
                    c * phi1 / (d * d).max(1) as f64
                } else {
                    0.0
                }
            })
        })
        .collect())
}

/// Banded innovation covariance: Σ(i,i) = σᵢ and
/// Σ(i,j) = √(σᵢσⱼ)·φ₂/|i−j|² for 0 < |i−j| ≤ band, else 0.
/// `band` is the caller-computed width p·w (the matrix itself is m×m).
/// Returns Σ together with its lower Cholesky factor.
pub fn innovation_covariance(
    m: usize,
    phi2: f64,
    band: f64,
    sigma: &[f64],
) -> Result<(Array2<f64>, Array2<f64>)> {
    if sigma.len() != m {
        return Err(Error::config(format!(
            "variance profile has length {}, expected m={m}",
            sigma.len()
        )));
    }
    if sigma.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::config("variance profile entries must be positive"));
    }
    if !(band > 0.0) {
        return Err(Error::config(format!("covariance bandwidth must be positive, got {band}")));
    }
    let cov = Array2::from_shape_fn((m, m), |(i, j)| {
        if i == j {
            sigma[i]
        } else {
            let d = i.abs_diff(j);
            if d as f64 <= band {
                (sigma[i] * sigma[j]).sqrt() * phi2 / ((d * d) as f64)
            } else {
                0.0
            }
        }
    });
    let chol = cholesky(&cov)?;
    Ok((cov, chol))
}

/// A fully specified factor-model data generator.
#[derive(Debug, Clone)]
pub struct FactorModelSpec {
    p: usize,
    m_factor: usize,
    m_order: usize,
    mixing: Vec<Array2<f64>>,
    innovation_chol: Array2<f64>,
    mu: Array1<f64>,
    /// Cached C_h = A_h·L, so Γ(h) = Σ_k C_k C_{k+h}' and generation is a
    /// handful of dense products.
    c: Vec<Array2<f64>>,
}

impl FactorModelSpec {
    /// Validates shapes and the m > p requirement, Cholesky-factors Σ, and
    /// caches the composite loadings.
    pub fn new(mixing: Vec<Array2<f64>>, sigma: Array2<f64>, mu: Array1<f64>) -> Result<Self> {
        let spec = Self::new_relaxed(mixing, sigma, mu)?;
        if spec.m_factor <= spec.p {
            return Err(Error::config(format!(
                "factor dimension must exceed p: got m={}, p={}",
                spec.m_factor, spec.p
            )));
        }
        Ok(spec)
    }

    /// Shape-checked constructor without the m > p requirement, for exact
    /// small-matrix oracle tests.
    pub(crate) fn new_relaxed(
        mixing: Vec<Array2<f64>>,
        sigma: Array2<f64>,
        mu: Array1<f64>,
    ) -> Result<Self> {
        if mixing.is_empty() {
            return Err(Error::config("at least one mixing matrix (A_0) is required"));
        }
        let (p, m_factor) = mixing[0].dim();
        if p == 0 || m_factor == 0 {
            return Err(Error::config("mixing matrices must be non-empty"));
        }
        for (h, a) in mixing.iter().enumerate() {
            if a.dim() != (p, m_factor) {
                return Err(Error::config(format!(
                    "mixing matrix A_{h} has shape {:?}, expected ({p}, {m_factor})",
                    a.dim()
                )));
            }
        }
        if sigma.dim() != (m_factor, m_factor) {
            return Err(Error::config(format!(
                "innovation covariance has shape {:?}, expected ({m_factor}, {m_factor})",
                sigma.dim()
            )));
        }
        if mu.len() != p {
            return Err(Error::config(format!(
                "mean vector has length {}, expected p={p}",
                mu.len()
            )));
        }
        let innovation_chol = cholesky(&sigma)?;
        let c = mixing
            .iter()
            .map(|a| {
                let mut out = Array2::<f64>::zeros((p, m_factor));
                general_mat_mul(1.0, a, &innovation_chol, 0.0, &mut out);
                out
            })
            .collect();
        Ok(FactorModelSpec {
            p,
            m_factor,
            m_order: mixing.len() - 1,
            mixing,
            innovation_chol,
            mu,
            c,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m_factor(&self) -> usize {
        self.m_factor
    }

    /// True dependence order M of the generated process.
    pub fn m_order(&self) -> usize {
        self.m_order
    }

    pub fn mixing(&self) -> &[Array2<f64>] {
        &self.mixing
    }

    pub fn innovation_chol(&self) -> &Array2<f64> {
        &self.innovation_chol
    }

    pub fn mu(&self) -> &Array1<f64> {
        &self.mu
    }

    /// Same generator with a different mean vector.
    pub fn with_mu(&self, mu: Array1<f64>) -> Result<Self> {
        if mu.len() != self.p {
            return Err(Error::config(format!(
                "mean vector has length {}, expected p={}",
                mu.len(),
                self.p
            )));
        }
        let mut spec = self.clone();
        spec.mu = mu;
        Ok(spec)
    }

    /// Exact Γ(h) = Σ_{k=0}^{M−h} A_k Σ A_{k+h}' = Σ_k C_k C_{k+h}'.
    pub fn true_autocov(&self, h: usize) -> Result<Array2<f64>> {
        if h > self.m_order {
            return Err(Error::dim(format!(
                "lag {h} exceeds the true order M={}",
                self.m_order
            )));
        }
        let mut gamma = Array2::<f64>::zeros((self.p, self.p));
        for k in 0..=(self.m_order - h) {
            general_mat_mul(1.0, &self.c[k], &self.c[k + h].t(), 1.0, &mut gamma);
        }
        Ok(gamma)
    }

    /// tr Γ(h) without forming the p×p matrix: Σ_k ⟨C_k, C_{k+h}⟩_F.
    pub fn tr_gamma(&self, h: usize) -> Result<f64> {
        if h > self.m_order {
            return Err(Error::dim(format!(
                "lag {h} exceeds the true order M={}",
                self.m_order
            )));
        }
        let mut tr = 0.0;
        for k in 0..=(self.m_order - h) {
            tr += self.c[k]
                .iter()
                .zip(self.c[k + h].iter())
                .map(|(a, b)| a * b)
                .sum::<f64>();
        }
        Ok(tr)
    }

    /// Signed-lag autocovariance with Γ(−h) = Γ(h)'.
    fn oriented_gamma(&self, lag: i64) -> Result<Array2<f64>> {
        let g = self.true_autocov(lag.unsigned_abs() as usize)?;
        Ok(if lag < 0 { g.t().to_owned() } else { g })
    }

    /// Exact tr(Γ(a)Γ(b)) for signed lags.
    pub fn tr_gamma_prod(&self, a: i64, b: i64) -> Result<f64> {
        let ga = self.oriented_gamma(a)?;
        let gb = self.oriented_gamma(b)?;
        Ok(trace_of_product(&ga, &gb))
    }

    /// Exact tr(Ω_n) with Ω_n = Σ_{|h|≤M} (1 − |h|/n)·Γ(h).
    pub fn tr_omega(&self, n: usize) -> Result<f64> {
        let nf = n as f64;
        let mut tr = self.tr_gamma(0)?;
        for h in 1..=self.m_order {
            tr += 2.0 * (1.0 - h as f64 / nf) * self.tr_gamma(h)?;
        }
        Ok(tr)
    }

    /// Exact tr(Ω_n²) = Σ_{a,b} (1−|a|/n)(1−|b|/n)·tr(Γ(a)Γ(b)) over the
    /// signed grid.
    pub fn tr_omega_sq(&self, n: usize) -> Result<f64> {
        let nf = n as f64;
        let mi = self.m_order as i64;
        let oriented: Vec<Array2<f64>> =
            (-mi..=mi).map(|lag| self.oriented_gamma(lag)).collect::<Result<_>>()?;
        let mut tr = 0.0;
        for (ia, a) in (-mi..=mi).enumerate() {
            let wa = 1.0 - a.unsigned_abs() as f64 / nf;
            for (ib, b) in (-mi..=mi).enumerate() {
                let wb = 1.0 - b.unsigned_abs() as f64 / nf;
                tr += wa * wb * trace_of_product(&oriented[ia], &oriented[ib]);
            }
        }
        Ok(tr)
    }
}

/// tr(A·B) = Σ_{ij} A[i,j]·B[j,i] without forming the product.
fn trace_of_product(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let (r, k) = a.dim();
    debug_assert_eq!(b.dim(), (k, r));
    let mut tr = 0.0;
    for i in 0..r {
        let row = a.row(i);
        let col = b.column(i);
        tr += row.dot(&col);
    }
    tr
}

/// Exact tr[(Ω⁽¹⁾/n₁ + Ω⁽²⁾/n₂)²] for two independent generators of equal
/// dimension — the denominator of the two-sample power prediction.
pub fn tr_omega_pair_sq(
    spec1: &FactorModelSpec,
    n1: usize,
    spec2: &FactorModelSpec,
    n2: usize,
) -> Result<f64> {
    if spec1.p != spec2.p {
        return Err(Error::dim(format!(
            "generators disagree in dimension: p1={}, p2={}",
            spec1.p, spec2.p
        )));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let mut cross = 0.0;
    for a in -(spec1.m_order as i64)..=(spec1.m_order as i64) {
        let wa = (1.0 - a.unsigned_abs() as f64 / n1f) / n1f;
        let ga = spec1.oriented_gamma(a)?;
        for b in -(spec2.m_order as i64)..=(spec2.m_order as i64) {
            let wb = (1.0 - b.unsigned_abs() as f64 / n2f) / n2f;
            cross += wa * wb * trace_of_product(&ga, &spec2.oriented_gamma(b)?);
        }
    }
    Ok(spec1.tr_omega_sq(n1)? / (n1f * n1f) + spec2.tr_omega_sq(n2)? / (n2f * n2f) + 2.0 * cross)
}

/// Draws an exactly stationary sample of n observations. Consumes
/// (n + M)·m standard normal draws from the stream in row-major order
/// (burn-in rows first).
pub fn generate(spec: &FactorModelSpec, n: usize, stream: &mut RngStream) -> Result<ObservationMatrix> {
    let (p, m, order) = (spec.p, spec.m_factor, spec.m_order);
    let rows = n + order;
    let z = Array2::from_shape_vec((rows, m), gaussian_draws(stream, rows * m))
        .expect("draw count matches shape");
    let mut x = Array2::<f64>::zeros((n, p));
    for h in 0..=order {
        // Observation t uses innovation row t + M − h.
        let block = z.slice(s![order - h..order - h + n, ..]);
        general_mat_mul(1.0, &block, &spec.c[h].t(), 1.0, &mut x);
    }
    if spec.mu.iter().any(|&v| v != 0.0) {
        for mut row in x.rows_mut() {
            row += &spec.mu;
        }
    }
    ObservationMatrix::new(x)
}

/// Adds a fixed vector to every observation (a location shift).
pub fn shift_rows(x: &ObservationMatrix, mu: &Array1<f64>) -> Result<ObservationMatrix> {
    if mu.len() != x.p() {
        return Err(Error::dim(format!(
            "shift vector has length {}, expected p={}",
            mu.len(),
            x.p()
        )));
    }
    let mut values = x.values().to_owned();
    for mut row in values.rows_mut() {
        row += mu;
    }
    ObservationMatrix::new(values)
}

/// The mean (or mean-difference) scenarios of the simulation studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanScenario {
    /// μ = 0.
    Null,
    /// μᵢ ~ p^{−1/2}·U(2,3) — shrinking alternative.
    PowerOne,
    /// μᵢ ~ p^{−1/4}·U(2,3) — slower-shrinking alternative.
    PowerTwo,
    /// Two-sample mean difference ~ p^{−1/2}·U(1,2).
    TwoSampleOne,
    /// Two-sample mean difference ~ p^{−1/4}·U(1,2).
    TwoSampleTwo,
}

impl MeanScenario {
    /// Canonical tag used in configs and output files.
    pub fn tag(self) -> &'static str {
        match self {
            MeanScenario::Null => "null",
            MeanScenario::PowerOne => "power1",
            MeanScenario::PowerTwo => "power2",
            MeanScenario::TwoSampleOne => "two-sample-1",
            MeanScenario::TwoSampleTwo => "two-sample-2",
        }
    }

    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "null" => Ok(MeanScenario::Null),
            "power1" => Ok(MeanScenario::PowerOne),
            "power2" => Ok(MeanScenario::PowerTwo),
            "two-sample-1" => Ok(MeanScenario::TwoSampleOne),
            "two-sample-2" => Ok(MeanScenario::TwoSampleTwo),
            other => Err(Error::config(format!("unknown mean scenario '{other}'"))),
        }
    }
}

/// Draws the scenario's mean vector; entries are iid. Each replicate
/// should call this afresh — the alternatives are random-direction, not a
/// fixed vector.
pub fn sample_mean_scenario(scenario: MeanScenario, p: usize, stream: &mut RngStream) -> Array1<f64> {
    let pf = p as f64;
    let (scale, lo, hi) = match scenario {
        MeanScenario::Null => return Array1::zeros(p),
        MeanScenario::PowerOne => (pf.powf(-0.5), 2.0, 3.0),
        MeanScenario::PowerTwo => (pf.powf(-0.25), 2.0, 3.0),
        MeanScenario::TwoSampleOne => (pf.powf(-0.5), 1.0, 2.0),
        MeanScenario::TwoSampleTwo => (pf.powf(-0.25), 1.0, 2.0),
    };
    Array1::from_shape_fn(p, |_| scale * stream.next_uniform_in(lo, hi))
}

/// One row of the simulation-study model catalog.
#[derive(Debug, Clone, Copy)]
pub struct ModelCatalogEntry {
    pub name: &'static str,
    /// True dependence order M.
    pub m_order: usize,
    /// Dimension ratio p/n.
    pub ratio: usize,
    pub phi1: f64,
    pub phi2: f64,
    pub w: f64,
    pub variant: MixingVariant,
}

impl ModelCatalogEntry {
    /// Instantiates the generator at sample size n: p = ratio·n,
    /// m = ⌈1.2p⌉, σ ≡ 1, zero mean. The linear-lag models use the full
    /// band (w = 1) in the mixing matrices; the innovation band is p·w for
    /// all models.
    pub fn spec_for(&self, n: usize) -> Result<FactorModelSpec> {
        let p = self.ratio * n;
        let m = (6 * p).div_ceil(5);
        let w_mix = match self.variant {
            MixingVariant::ReciprocalH => self.w,
            MixingVariant::LinearH => 1.0,
        };
        let mixing = build_mixing(p, m, self.m_order, self.phi1, w_mix, self.variant)?;
        let band = p as f64 * self.w;
        let (sigma, _) = innovation_covariance(m, self.phi2, band, &vec![1.0; m])?;
        FactorModelSpec::new(mixing, sigma, Array1::zeros(p))
    }
}

/// The four one-sample study models: (ratio, φ₁, φ₂, w) =
/// I (M=0): (4, 0.2, 0.3, 0.9); II (M=1): (1, 0.6, 0.4, 0.8);
/// III (M=2): (2, 0.6, 0.6, 0.8); IV (M=3): (3, 0.6, 0.3, 0.8).
/// Models I–II decay in the lag, III–IV grow in it.
pub fn model_catalog() -> [ModelCatalogEntry; 4] {
    [
        ModelCatalogEntry {
            name: "I",
            m_order: 0,
            ratio: 4,
            phi1: 0.2,
            phi2: 0.3,
            w: 0.9,
            variant: MixingVariant::ReciprocalH,
        },
        ModelCatalogEntry {
            name: "II",
            m_order: 1,
            ratio: 1,
            phi1: 0.6,
            phi2: 0.4,
            w: 0.8,
            variant: MixingVariant::ReciprocalH,
        },
        ModelCatalogEntry {
            name: "III",
            m_order: 2,
            ratio: 2,
            phi1: 0.6,
            phi2: 0.6,
            w: 0.8,
            variant: MixingVariant::LinearH,
        },
        ModelCatalogEntry {
            name: "IV",
            m_order: 3,
            ratio: 3,
            phi1: 0.6,
            phi2: 0.3,
            w: 0.8,
            variant: MixingVariant::LinearH,
        },
    ]
}

/// Catalog lookup by name.
pub fn catalog_entry(name: &str) -> Result<ModelCatalogEntry> {
    model_catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::config(format!("unknown model '{name}' (expected I, II, III or IV)")))
}

/// The two-sample study generators at true order M and sample size n
/// (n₁ = n₂ = n, p = 4n): reciprocal-lag mixing with
/// (w⁽¹⁾, w⁽²⁾, φ₁⁽¹⁾, φ₁⁽²⁾, φ₂⁽¹⁾, φ₂⁽²⁾) = (0.9, 0.5, 0.2, 0.4, 0.3, 0.5).
pub fn two_sample_specs(m_order: usize, n: usize) -> Result<(FactorModelSpec, FactorModelSpec)> {
    let p = 4 * n;
    let m = (6 * p).div_ceil(5);
    let build = |phi1: f64, phi2: f64, w: f64| -> Result<FactorModelSpec> {
        let mixing = build_mixing(p, m, m_order, phi1, w, MixingVariant::ReciprocalH)?;
        let (sigma, _) = innovation_covariance(m, phi2, p as f64 * w, &vec![1.0; m])?;
        FactorModelSpec::new(mixing, sigma, Array1::zeros(p))
    };
    Ok((build(0.2, 0.3, 0.9)?, build(0.4, 0.5, 0.5)?))
}
