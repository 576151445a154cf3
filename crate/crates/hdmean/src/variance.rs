//! Variance machinery for the studentized statistic: the ξ weight grid,
//! the gapped index sets A(a,b) and B(t,s), the trace-product estimators
//! tr̂(Γ(a)Γ(b)) (one-sample and two-sample cross term), and the assembled
//! variance estimate V̂.
//!
//! The gaps exploit M-dependence: pairs (t,s) closer than M+1 in time, or
//! whose shifted partners are, would contaminate the expectation of the
//! product estimator with same-pair terms, so they are excluded; the local
//! mean X̄* likewise averages only observations independent of all four
//! indices in play. Everything is evaluated through Gram-matrix
//! functionals, so the cost is O(n²M³ + n²p) and no p×p matrix is formed.

use ndarray::{linalg::general_mat_mul, Array2};

use crate::autocov::{gram, GramMatrix};
use crate::debias::chi_n;
use crate::error::{Error, Result};
use crate::io::ObservationMatrix;

/// ξ_n(a,b) = (1/n²)·(1+χ_n)·(1−|a|/n)(1−|b|/n) over (a,b) ∈ [−M,M]²
/// (the χ factor is dropped when `include_chi` is false).
#[derive(Debug, Clone)]
pub struct XiWeights {
    /// Grid indexed by (a+M, b+M).
    pub xi: Array2<f64>,
    pub n: usize,
    pub m: usize,
    pub include_chi: bool,
}

impl XiWeights {
    /// Weight at signed lags (a, b).
    pub fn at(&self, a: i64, b: i64) -> f64 {
        let m = self.m as i64;
        self.xi[[(a + m) as usize, (b + m) as usize]]
    }
}

/// The ξ weight grid; `include_chi` defaults to true in all statistic paths.
pub fn xi_weights(n: usize, m: usize, include_chi: bool) -> Result<XiWeights> {
    if m + 2 > n {
        return Err(Error::dim(format!("lag order M={m} needs n >= M+2, got n={n}")));
    }
    let nf = n as f64;
    let chi = if include_chi { chi_n(n, m) } else { 0.0 };
    let base = (1.0 + chi) / (nf * nf);
    let side = 2 * m + 1;
    let xi = Array2::from_shape_fn((side, side), |(i, j)| {
        let a = i as i64 - m as i64;
        let b = j as i64 - m as i64;
        base * (1.0 - a.unsigned_abs() as f64 / nf) * (1.0 - b.unsigned_abs() as f64 / nf)
    });
    Ok(XiWeights { xi, n, m, include_chi })
}

/// The gapped pair set A(a,b): all (t,s) with t, t+a, s, s+b inside [0,n)
/// and |t−s| > M, |(t+a)−(s+b)| > M. Indices are 0-based.
#[derive(Debug, Clone, Copy)]
pub struct IndexSetA {
    pub n: usize,
    pub m: usize,
    pub a: i64,
    pub b: i64,
}

/// Inclusive valid range for the base index so that both it and its shift
/// by `lag` stay inside [0, n).
fn shifted_range(n: usize, lag: i64) -> (i64, i64) {
    ((-lag).max(0), (n as i64 - 1 - lag).min(n as i64 - 1))
}

impl IndexSetA {
    fn contains_pair(&self, t: i64, s: i64) -> bool {
        let m = self.m as i64;
        (t - s).abs() > m && (t + self.a - s - self.b).abs() > m
    }

    /// Iterates pairs in deterministic (t asc, s asc) order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (t_lo, t_hi) = shifted_range(self.n, self.a);
        let (s_lo, s_hi) = shifted_range(self.n, self.b);
        (t_lo..=t_hi).flat_map(move |t| {
            (s_lo..=s_hi)
                .filter(move |&s| self.contains_pair(t, s))
                .map(move |s| (t as usize, s as usize))
        })
    }

    /// Exact pair count n_{a,b}.
    pub fn cardinality(&self) -> usize {
        self.iter().count()
    }
}

/// Builds A(a,b), rejecting out-of-range lags and empty sets ("n too small
/// for this M").
pub fn index_set_a(n: usize, m: usize, a: i64, b: i64) -> Result<IndexSetA> {
    let mi = m as i64;
    if a.abs() > mi || b.abs() > mi {
        return Err(Error::dim(format!("lags (a={a}, b={b}) outside [-{m}, {m}]")));
    }
    let set = IndexSetA { n, m, a, b };
    if set.iter().next().is_none() {
        return Err(Error::empty_set(format!(
            "A({a},{b}) is empty: n={n} too small for M={m}"
        )));
    }
    Ok(set)
}

/// The exclusion complement of B(t,s) as at most two disjoint inclusive
/// index intervals, clipped to [0, n).
///
/// B(t,s) excludes every index within M of any of t, s, t+a, s+b. Since
/// |a| ≤ M, the t-side pair always merges into one interval, and likewise
/// the s-side, leaving at most two runs to deduplicate.
fn exclusion_intervals(
    n: usize,
    m: usize,
    t: usize,
    s: usize,
    a: i64,
    b: i64,
) -> ([(i64, i64); 2], usize) {
    let (mi, ni) = (m as i64, n as i64);
    let clip = |lo: i64, hi: i64| (lo.max(0), hi.min(ni - 1));
    let t = t as i64;
    let s = s as i64;
    let side_t = clip(t + a.min(0) - mi, t + a.max(0) + mi);
    let side_s = clip(s + b.min(0) - mi, s + b.max(0) + mi);
    let (first, second) = if side_t.0 <= side_s.0 { (side_t, side_s) } else { (side_s, side_t) };
    if second.0 <= first.1 {
        ([(first.0, first.1.max(second.1)), (0, -1)], 1)
    } else {
        ([first, second], 2)
    }
}

/// The local-mean functional for one (t, s, a, b): the size m_B of the
/// averaging set B(t,s) and inner products of the local mean X̄* (the
/// average of {X_w : w ∈ B}) against arbitrary observations, evaluated
/// through Gram rows in O(M) per call.
#[derive(Debug, Clone, Copy)]
pub struct LocalMean<'a> {
    gm: &'a GramMatrix,
    intervals: [(i64, i64); 2],
    k: usize,
    /// |B(t,s)|.
    pub m_b: usize,
}

impl LocalMean<'_> {
    /// X̄*'X_u = (row_sums[u] − Σ_{w∉B} g[w,u]) / m_B.
    pub fn mean_dot_x(&self, u: usize) -> f64 {
        let mut excluded = 0.0;
        for &(lo, hi) in &self.intervals[..self.k] {
            for w in lo..=hi {
                excluded += self.gm.g[[w as usize, u]];
            }
        }
        (self.gm.row_sums[u] - excluded) / self.m_b as f64
    }
}

/// Builds the B(t,s) exclusion geometry for (t, s, a, b). Fails when every
/// observation is within M of one of the four anchor indices.
pub fn local_mean_excluding<'a>(
    gm: &'a GramMatrix,
    t: usize,
    s: usize,
    a: i64,
    b: i64,
    m: usize,
) -> Result<LocalMean<'a>> {
    let n = gm.g.nrows();
    let ni = n as i64;
    for (name, base, lag) in [("t", t, a), ("s", s, b)] {
        let idx = base as i64;
        let shifted = idx + lag;
        if idx >= ni || shifted < 0 || shifted >= ni {
            return Err(Error::dim(format!(
                "{name}={base} with lag {lag} leaves [0, {n}) for the local mean"
            )));
        }
    }
    let (intervals, k) = exclusion_intervals(n, m, t, s, a, b);
    let excluded: i64 = intervals[..k].iter().map(|&(lo, hi)| hi - lo + 1).sum();
    let m_b = n as i64 - excluded;
    if m_b <= 0 {
        return Err(Error::empty_set(format!(
            "B(t={t}, s={s}) is empty for a={a}, b={b}, M={m}, n={n}"
        )));
    }
    Ok(LocalMean { gm, intervals, k, m_b: m_b as usize })
}

/// Estimates tr̂(Γ(a)Γ(b)) over the signed lag grid with the pair counts
/// n_{a,b} actually used.
#[derive(Debug, Clone)]
pub struct TraceProductTable {
    /// Entry (a+M, b+M) = tr̂(Γ(a)Γ(b)).
    pub est: Array2<f64>,
    /// Pair counts n_{a,b} in the same layout.
    pub counts: Array2<u64>,
    /// Sample sizes (equal for the one-sample table).
    pub n1: usize,
    pub n2: usize,
    pub m: usize,
}

impl TraceProductTable {
    /// Estimate at signed lags (a, b).
    pub fn at(&self, a: i64, b: i64) -> f64 {
        let m = self.m as i64;
        self.est[[(a + m) as usize, (b + m) as usize]]
    }

    /// Smallest pair count over the grid.
    pub fn min_count(&self) -> u64 {
        self.counts.iter().copied().min().unwrap_or(0)
    }
}

fn check_table_size(n: usize, m: usize, what: &str) -> Result<()> {
    let need = 4 * (m + 1) + 2;
    if n < need {
        return Err(Error::dim(format!(
            "{what} needs n >= 4(M+1)+2 = {need} for M={m}, got n={n}"
        )));
    }
    Ok(())
}

/// Column-wise prefix sums: out[[i, s]] = Σ_{w<i} g[[w, s]].
fn column_prefix(g: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = g.dim();
    let mut out = Array2::<f64>::zeros((rows + 1, cols));
    for i in 0..rows {
        for s in 0..cols {
            out[[i + 1, s]] = out[[i, s]] + g[[i, s]];
        }
    }
    out
}

/// One-sample trace-product table from a precomputed Gram matrix.
///
/// Entry (a,b) averages (X_{t+a} − X̄*)'X_s · (X_{s+b} − X̄*)'X_t over
/// A(a,b); both factors share the local mean X̄* of B(t,s). Summation
/// order is fixed (t outer, s inner) so results are deterministic.
pub fn trace_product_table_from_gram(gm: &GramMatrix, m: usize) -> Result<TraceProductTable> {
    let n = gm.g.nrows();
    check_table_size(n, m, "trace_product_table")?;
    let prefix = column_prefix(&gm.g);
    let side = 2 * m + 1;
    let mut est = Array2::<f64>::zeros((side, side));
    let mut counts = Array2::<u64>::zeros((side, side));
    let mi = m as i64;
    for ai in 0..side {
        let a = ai as i64 - mi;
        let (t_lo, t_hi) = shifted_range(n, a);
        for bi in 0..side {
            let b = bi as i64 - mi;
            let (s_lo, s_hi) = shifted_range(n, b);
            let mut acc = 0.0f64;
            let mut cnt = 0u64;
            for t in t_lo..=t_hi {
                let row_ta = gm.g.row((t + a) as usize);
                let tu = t as usize;
                for s in s_lo..=s_hi {
                    if (t - s).abs() <= mi || (t + a - s - b).abs() <= mi {
                        continue;
                    }
                    let su = s as usize;
                    let (intervals, k) = exclusion_intervals(n, m, tu, su, a, b);
                    let mut m_b = n as i64;
                    let mut excl_t = 0.0;
                    let mut excl_s = 0.0;
                    for &(lo, hi) in &intervals[..k] {
                        m_b -= hi - lo + 1;
                        let (lo, hi) = (lo as usize, hi as usize + 1);
                        excl_t += prefix[[hi, tu]] - prefix[[lo, tu]];
                        excl_s += prefix[[hi, su]] - prefix[[lo, su]];
                    }
                    if m_b <= 0 {
                        return Err(Error::empty_set(format!(
                            "B(t={tu}, s={su}) is empty for a={a}, b={b}, M={m}, n={n}"
                        )));
                    }
                    let mbf = m_b as f64;
                    let f1 = row_ta[su] - (gm.row_sums[su] - excl_s) / mbf;
                    let f2 = gm.g[[(s + b) as usize, tu]] - (gm.row_sums[tu] - excl_t) / mbf;
                    acc += f1 * f2;
                    cnt += 1;
                }
            }
            if cnt == 0 {
                return Err(Error::empty_set(format!(
                    "A({a},{b}) is empty: n={n} too small for M={m}"
                )));
            }
            est[[ai, bi]] = acc / cnt as f64;
            counts[[ai, bi]] = cnt;
        }
    }
    Ok(TraceProductTable { est, counts, n1: n, n2: n, m })
}

/// One-sample trace-product table tr̂(Γ(a)Γ(b)) for (a,b) ∈ [−M,M]².
pub fn trace_product_table(x: &ObservationMatrix, m: usize) -> Result<TraceProductTable> {
    trace_product_table_from_gram(&gram(x), m)
}

/// V̂ = 2·Σ_{a,b} ξ_n(a,b)·tr̂(Γ(a)Γ(b)) over the full signed grid.
///
/// May be non-positive in pathological samples; callers assembling a test
/// statistic must treat that as a degenerate variance, not floor it.
pub fn variance_estimate(table: &TraceProductTable, xi: &XiWeights) -> Result<f64> {
    if table.m != xi.m || table.n1 != xi.n || table.n2 != xi.n {
        return Err(Error::config(format!(
            "trace table is for (n={}, M={}) but weights are for (n={}, M={})",
            table.n1, table.m, xi.n, xi.m
        )));
    }
    let mut v = 0.0;
    for (w, e) in xi.xi.iter().zip(table.est.iter()) {
        v += w * e;
    }
    Ok(2.0 * v)
}

/// Two-sample cross table tr̂(Γ⁽¹⁾(a)Γ⁽²⁾(b)).
///
/// Entry (a,b) averages (X⁽¹⁾_{t+a} − X̄⁽¹⁾*)'X⁽²⁾_s · (X⁽²⁾_{s+b} − X̄⁽²⁾*)'X⁽¹⁾_t
/// over every (t,s) in the valid rectangular window: the samples are
/// independent, so no cross-sample gap is needed. Each local mean uses its
/// own sample's exclusion set B⁽ʷ⁾ (all indices within M of the base or
/// shifted anchor).
pub fn cross_trace_table(
    x1: &ObservationMatrix,
    x2: &ObservationMatrix,
    m: usize,
) -> Result<TraceProductTable> {
    if x1.p() != x2.p() {
        return Err(Error::dim(format!(
            "samples disagree in dimension: p1={}, p2={}",
            x1.p(),
            x2.p()
        )));
    }
    let (n1, n2) = (x1.n(), x2.n());
    check_table_size(n1, m, "cross_trace_table (sample 1)")?;
    check_table_size(n2, m, "cross_trace_table (sample 2)")?;
    let mut g12 = Array2::<f64>::zeros((n1, n2));
    general_mat_mul(1.0, x1.values(), &x2.values().t(), 0.0, &mut g12);
    // Prefix over rows for sample-1 exclusions, over columns for sample-2.
    let col_prefix = column_prefix(&g12);
    let row_prefix = column_prefix(&g12.t().to_owned());
    let mi = m as i64;
    let side = 2 * m + 1;
    let mut est = Array2::<f64>::zeros((side, side));
    let mut counts = Array2::<u64>::zeros((side, side));
    // Single-sample exclusion: indices within M of the anchor or its shift;
    // the two intervals always merge because |lag| ≤ M.
    let one_sided = |n: usize, u: usize, lag: i64| -> (usize, usize, f64) {
        let lo = (u as i64 + lag.min(0) - mi).max(0) as usize;
        let hi = (u as i64 + lag.max(0) + mi).min(n as i64 - 1) as usize;
        (lo, hi, (n - (hi - lo + 1)) as f64)
    };
    for ai in 0..side {
        let a = ai as i64 - mi;
        let (t_lo, t_hi) = shifted_range(n1, a);
        for bi in 0..side {
            let b = bi as i64 - mi;
            let (s_lo, s_hi) = shifted_range(n2, b);
            // Sample-2 geometry depends only on s: hoist it.
            let s_geom: Vec<(usize, usize, f64)> =
                (s_lo..=s_hi).map(|s| one_sided(n2, s as usize, b)).collect();
            let mut acc = 0.0f64;
            for t in t_lo..=t_hi {
                let tu = t as usize;
                let (lo1, hi1, mb1) = one_sided(n1, tu, a);
                let row_ta = g12.row((t + a) as usize);
                let row_t = g12.row(tu);
                let row_total = row_prefix[[n2, tu]];
                for (off, s) in (s_lo..=s_hi).enumerate() {
                    let su = s as usize;
                    let (lo2, hi2, mb2) = s_geom[off];
                    let excl1 = col_prefix[[hi1 + 1, su]] - col_prefix[[lo1, su]];
                    let f1 = row_ta[su] - (col_prefix[[n1, su]] - excl1) / mb1;
                    let excl2 = row_prefix[[hi2 + 1, tu]] - row_prefix[[lo2, tu]];
                    let f2 = row_t[(s + b) as usize] - (row_total - excl2) / mb2;
                    acc += f1 * f2;
                }
            }
            let cnt = ((t_hi - t_lo + 1) * (s_hi - s_lo + 1)) as u64;
            est[[ai, bi]] = acc / cnt as f64;
            counts[[ai, bi]] = cnt;
        }
    }
    Ok(TraceProductTable { est, counts, n1, n2, m })
}
