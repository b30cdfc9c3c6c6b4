//! Partial sums, the CUSUM process on the grid `s = i/n`, the argmax
//! change-point estimator and the integrated squared CUSUM.
//!
//! For observations `Z_1, ..., Z_n` the process is
//!
//! ```text
//! U_n(i/n) = (1/n) S_i - (i/n^2) S_n,    S_i = Z_1 + ... + Z_i
//! ```
//!
//! evaluated only at grid points. `U_n(1) = 0` exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::sample::Sample;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// CUSUM values `U_n(i/n)` for `i = 1..=n`, stored as an `n x d` matrix
/// (row `i - 1` holds `U_n(i/n)`).
#[derive(Debug, Clone, PartialEq)]
pub struct CusumProcess {
    values: DMatrix<f64>,
}

impl CusumProcess {
    /// Wraps precomputed values. The last row must be zero and all entries finite.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 || values.ncols() == 0 {
            return Err(invalid("process needs n >= 2 and d >= 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("process has non-finite entries"));
        }
        if values.row(values.nrows() - 1).iter().any(|&v| v != 0.0) {
            return Err(invalid("process must vanish at s = 1"));
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    /// `U_n(i/n)` for `1 <= i <= n`.
    pub fn at(&self, i: usize) -> DVector<f64> {
        assert!((1..=self.n()).contains(&i), "grid index {i} out of range");
        self.values.row(i - 1).transpose()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Squared Euclidean norms `||U_n(i/n)||^2`, `i = 1..=n`.
    pub fn squared_norms(&self) -> Vec<f64> {
        self.values
            .row_iter()
            .map(|r| r.iter().map(|v| v * v).sum())
            .collect()
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.values *= factor;
    }
}

/// Estimated change point: `t_hat = index / n` with `1 <= index <= n - 1`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChangePointEstimate {
    pub t_hat: f64,
    pub index: usize,
}

impl ChangePointEstimate {
    pub fn new(index: usize, n: usize) -> Result<Self> {
        if n < 2 || index == 0 || index >= n {
            return Err(invalid(format!(
                "change-point index {index} outside 1..={} ",
                n.saturating_sub(1)
            )));
        }
        Ok(Self {
            t_hat: index as f64 / n as f64,
            index,
        })
    }

    /// Length of the pre-break segment, `floor(n * t_hat)`.
    pub fn pre_len(&self) -> usize {
        self.index
    }
}

/// CUSUM process of the sample on the grid `s = i/n`.
pub fn cusum_process(sample: &Sample) -> CusumProcess {
    let (n, d) = (sample.n(), sample.d());
    let data = sample.data();
    let nf = n as f64;
    let mut values = DMatrix::zeros(n, d);
    for j in 0..d {
        let col = data.column(j);
        let mut partial = Vec::with_capacity(n);
        let mut acc = CompensatedSum::default();
        for &z in col.iter() {
            acc.add(z);
            partial.push(acc.value());
        }
        let total = partial[n - 1];
        for (i, &s) in partial.iter().enumerate() {
            let frac = (i + 1) as f64 / nf;
            values[(i, j)] = (s - frac * total) / nf;
        }
        // frac == 1.0 exactly at i = n, so this is already zero; keep it explicit.
        values[(n - 1, j)] = 0.0;
    }
    CusumProcess { values }
}

/// Smallest index in `1..=n-1` maximizing `norms[i - 1]`.
pub(crate) fn argmax_index(squared_norms: &[f64]) -> usize {
    let n = squared_norms.len();
    let mut best = 1;
    let mut best_val = squared_norms[0];
    for (i, &v) in squared_norms.iter().enumerate().take(n - 1).skip(1) {
        if v > best_val {
            best_val = v;
            best = i + 1;
        }
    }
    best
}

/// Argmax estimator of the change point, ties broken toward the smallest index.
pub fn estimate_changepoint(process: &CusumProcess) -> ChangePointEstimate {
    let index = argmax_index(&process.squared_norms());
    ChangePointEstimate::new(index, process.n()).expect("argmax lies in 1..n-1")
}

/// Riemann sum `(1/n) sum_i ||U_n(i/n)||^2`.
pub fn integrated_squared_cusum(process: &CusumProcess) -> f64 {
    compensated_sum(process.squared_norms()) / process.n() as f64
}

/// `3 / (t(1-t))^2 * integral`, minus `correction` when one is given.
pub fn mhat_squared(integral: f64, cp: &ChangePointEstimate, correction: Option<f64>) -> f64 {
    let t = cp.t_hat;
    let scaled = 3.0 / (t * (1.0 - t)).powi(2) * integral;
    scaled - correction.unwrap_or(0.0)
}
