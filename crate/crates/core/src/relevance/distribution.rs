//! Relevant change in the distribution function, measured by the L2 distance
//! `||F1 - F2|| = (int (F1(z) - F2(z))^2 dz)^(1/2)`.
//!
//! With order statistics `z_(1) <= ... <= z_(n)` the CUSUM functional is
//!
//! ```text
//! T_n(i) = sum_k (z_(k+1) - z_(k)) * ((1/n) #{j <= i : Z_j <= z_(k)}
//!                                     - (i/n^2) #{j : Z_j <= z_(k)})^2
//! ```
//!
//! which is already a squared norm. [`distribution_cusum_terms`] evaluates all
//! `T_n(i)` in `O(n log n)` by expanding the square and tracking the counts
//! with two Fenwick trees over the ranks.

use super::{
    assemble_report, check_len, post_break_weight, pre_break_weight, LrvMode, RelevanceConfig,
    RelevanceReport, ReportParts, SegmentEstimates, TestKind,
};
use crate::cusum::{argmax_index, compensated_sum, mhat_squared, ChangePointEstimate};
use crate::error::{invalid, Result};
use crate::lrv::{andrews_bandwidth, ar1_coefficient, bartlett_lrv};

/// A distribution function that can be integrated cell by cell.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;

    /// Representative value on the grid cell `[lo, hi)`.
    fn cell_value(&self, lo: f64, hi: f64) -> f64 {
        self.cdf(0.5 * (lo + hi))
    }
}

impl<F: Fn(f64) -> f64> Cdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Empirical distribution function (right-continuous step function).
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("empirical distribution of an empty sample"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("empirical distribution with non-finite values"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn support(&self) -> &[f64] {
        &self.sorted
    }

    fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }
}

impl Cdf for Ecdf {
    fn cdf(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.sorted.len() as f64
    }

    // constant on [lo, hi) whenever the grid contains every jump
    fn cell_value(&self, lo: f64, _hi: f64) -> f64 {
        self.cdf(lo)
    }
}

/// Sorted union of the two supports; contains every jump of both ECDFs.
pub fn pooled_grid(a: &Ecdf, b: &Ecdf) -> Vec<f64> {
    let mut grid = Vec::with_capacity(a.len() + b.len());
    grid.extend_from_slice(a.support());
    grid.extend_from_slice(b.support());
    grid.sort_by(f64::total_cmp);
    grid
}

/// `(int (F1 - F2)^2 dz)^(1/2)` as a cell sum over the sorted `grid`.
///
/// Each cell `[g_k, g_{k+1})` contributes its width times the squared
/// difference of the representative values. For step functions whose jumps
/// all lie on the grid this is exact; for continuous CDFs it is the midpoint
/// rule, and the grid must cover the region where `F1` and `F2` differ.
pub fn cdf_l2_distance(f1: &impl Cdf, f2: &impl Cdf, grid: &[f64]) -> f64 {
    let sum = compensated_sum(grid.windows(2).map(|w| {
        let width = w[1] - w[0];
        if width <= 0.0 {
            return 0.0;
        }
        let diff = f1.cell_value(w[0], w[1]) - f2.cell_value(w[0], w[1]);
        width * diff * diff
    }));
    sum.sqrt()
}

/// Exact L2 distance between two empirical distribution functions.
pub fn ecdf_l2_distance(a: &Ecdf, b: &Ecdf) -> f64 {
    cdf_l2_distance(a, b, &pooled_grid(a, b))
}

/// `int int D(z1) D(z2) (F(z1 ^ z2) - F(z1) F(z2)) dz1 dz2` from per-cell
/// weights `a_k = width_k * D_k` and CDF values `F_k` (nondecreasing in `k`).
fn independence_integral(a: &[f64], f: &[f64]) -> f64 {
    let mut suffix = 0.0;
    let mut first = 0.0;
    for k in (0..a.len()).rev() {
        first += a[k] * f[k] * (a[k] + 2.0 * suffix);
        suffix += a[k];
    }
    let mean: f64 = a.iter().zip(f).map(|(x, y)| x * y).sum();
    (first - mean * mean).max(0.0)
}

/// Asymptotic variance of the distribution statistic for serially
/// independent segments:
///
/// ```text
/// 4 / (5 t^2 (1-t)^2) * [ t(5-10t+6t^2) int int D(z1) D(z2) (F1(z1 ^ z2) - F1(z1)F1(z2))
///                        + (1-3t+8t^2-6t^3) int int D(z1) D(z2) (F2(z1 ^ z2) - F2(z1)F2(z2)) ]
/// ```
///
/// with `D = F1 - F2`, the double integrals taken as cell sums over `grid`.
pub fn tau2_distribution(t: f64, f1: &impl Cdf, f2: &impl Cdf, grid: &[f64]) -> f64 {
    let cells = grid.len().saturating_sub(1);
    let mut a = Vec::with_capacity(cells);
    let mut v1 = Vec::with_capacity(cells);
    let mut v2 = Vec::with_capacity(cells);
    for w in grid.windows(2) {
        let (p, q) = (f1.cell_value(w[0], w[1]), f2.cell_value(w[0], w[1]));
        a.push((w[1] - w[0]) * (p - q));
        v1.push(p);
        v2.push(q);
    }
    let i1 = independence_integral(&a, &v1);
    let i2 = independence_integral(&a, &v2);
    4.0 / (5.0 * (t * (1.0 - t)).powi(2)) * (pre_break_weight(t) * i1 + post_break_weight(t) * i2)
}

struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(size: usize) -> Self {
        Self {
            tree: vec![0.0; size + 1],
        }
    }

    fn add(&mut self, pos: usize, value: f64) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += value;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `0..=pos`.
    fn prefix(&self, pos: usize) -> f64 {
        let mut i = (pos + 1).min(self.tree.len() - 1);
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    fn total(&self) -> f64 {
        self.prefix(self.tree.len() - 2)
    }
}

/// `T_n(i)` for `i = 1..=n` (index `i - 1` of the result).
pub fn distribution_cusum_terms(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut z = series.to_vec();
    z.sort_by(f64::total_cmp);
    let cells = n - 1;
    let width: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
    let count_le: Vec<f64> = (0..cells)
        .map(|k| z.partition_point(|&v| v <= z[k]) as f64)
        .collect();

    // suffix sums over cells, index n-1 (and beyond) is the empty suffix
    let mut w_suffix = vec![0.0; n];
    let mut wc_suffix = vec![0.0; n];
    for k in (0..cells).rev() {
        w_suffix[k] = w_suffix[k + 1] + width[k];
        wc_suffix[k] = wc_suffix[k + 1] + width[k] * count_le[k];
    }
    let s3: f64 = (0..cells)
        .map(|k| width[k] * count_le[k] * count_le[k])
        .sum();

    let mut counts = Fenwick::new(n);
    let mut weights = Fenwick::new(n);
    let (mut s1, mut s2) = (0.0, 0.0);
    let nf = n as f64;
    let mut out = Vec::with_capacity(n);
    for (i, &v) in series.iter().enumerate() {
        let r = z.partition_point(|&u| u < v);
        let lower = counts.prefix(r);
        let upper_weight = weights.total() - weights.prefix(r);
        let q = w_suffix[r] * lower + upper_weight;
        s1 += 2.0 * q + w_suffix[r];
        s2 += wc_suffix[r];
        counts.add(r, 1.0);
        weights.add(r, w_suffix[r]);

        let step = (i + 1) as f64;
        let value = s1 / (nf * nf) - 2.0 * step * s2 / (nf * nf * nf)
            + step * step * s3 / (nf * nf * nf * nf);
        out.push(value.max(0.0));
    }
    out[n - 1] = 0.0;
    out
}

/// Per-observation functional `g(Z_i) = int D(z) 1{Z_i <= z} dz`, whose
/// long-run variance gives the dependent-data version of the double integrals.
fn influence_series(series: &[f64], grid: &[f64], a: &[f64]) -> Vec<f64> {
    let mut suffix = vec![0.0; a.len() + 1];
    for k in (0..a.len()).rev() {
        suffix[k] = suffix[k + 1] + a[k];
    }
    series
        .iter()
        .map(|&v| suffix[grid.partition_point(|&u| u < v).min(a.len())])
        .collect()
}

fn hac_variance(values: &[f64]) -> f64 {
    let center = compensated_sum(values.iter().copied()) / values.len() as f64;
    let gamma = if values.len() >= 3 {
        andrews_bandwidth(ar1_coefficient(values).unwrap_or(0.0), values.len())
    } else {
        0.0
    };
    bartlett_lrv(values, center, gamma)
}

/// Test for a relevant change in the distribution function (L2 distance).
pub fn distribution_test(series: &[f64], config: &RelevanceConfig) -> Result<RelevanceReport> {
    config.validate()?;
    check_len(series.len())?;
    if let Some(pos) = series.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!(
            "non-finite observation at row {}",
            pos + 1
        )));
    }
    let n = series.len();
    let terms = distribution_cusum_terms(series);
    let cp = ChangePointEstimate::new(argmax_index(&terms), n)?;
    let integral = compensated_sum(terms.iter().copied()) / n as f64;
    let m2 = mhat_squared(integral, &cp, None);

    let k = cp.pre_len();
    let (before, after) = series.split_at(k);
    let f1 = Ecdf::new(before)?;
    let f2 = Ecdf::new(after)?;
    let grid = pooled_grid(&f1, &f2);
    let mode = config.lrv_mode_for(TestKind::Distribution);
    let t = cp.t_hat;
    let tau2 = match mode {
        LrvMode::PlainVariance => tau2_distribution(t, &f1, &f2, &grid),
        LrvMode::HacBartlett => {
            let a: Vec<f64> = grid
                .windows(2)
                .map(|w| (w[1] - w[0]) * (f1.cdf(w[0]) - f2.cdf(w[0])))
                .collect();
            let g = influence_series(series, &grid, &a);
            let (g1, g2) = g.split_at(k);
            4.0 / (5.0 * (t * (1.0 - t)).powi(2))
                * (pre_break_weight(t) * hac_variance(g1) + post_break_weight(t) * hac_variance(g2))
        }
    };

    Ok(assemble_report(
        ReportParts {
            kind: TestKind::Distribution,
            n,
            m_hat_squared: m2,
            tau_hat_squared: tau2,
            cp,
            segment_estimates: SegmentEstimates {
                before: vec![compensated_sum(before.iter().copied()) / k as f64],
                after: vec![compensated_sum(after.iter().copied()) / (n - k) as f64],
            },
            lrv_mode: mode,
        },
        config,
    ))
}
