//! Long-run variance estimation.
//!
//! The HAC estimator uses the Bartlett kernel `k(x) = (1 - |x|) 1{|x| <= 1}`
//! with the AR(1) plug-in bandwidth
//!
//! ```text
//! gamma = 1.1477 * (4 rho^2 m / (1 - rho^2)^2)^(1/3)
//! ```
//!
//! applied separately to the segments before and after the estimated change
//! point. Multivariate series use one bandwidth per segment, taken from the
//! AR(1) fit of the leading principal coordinate of that segment.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::cusum::{compensated_sum, ChangePointEstimate};
use crate::error::{insufficient, invalid, Result};
use crate::sample::Sample;

/// Bandwidth constant of the Bartlett-kernel AR(1) plug-in rule.
pub const BARTLETT_BANDWIDTH_CONSTANT: f64 = 1.1477;

/// Bound on `|rho_hat|` keeping the bandwidth finite.
pub const RHO_CLAMP: f64 = 0.99;

/// Long-run covariance before (`v1`) and after (`v2`) the change point.
#[derive(Debug, Clone, PartialEq)]
pub struct LrvEstimate {
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
    pub bandwidth1: f64,
    pub bandwidth2: f64,
    pub rho1: f64,
    pub rho2: f64,
}

/// Sample means of the two segments split at `floor(n t_hat)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMeans {
    pub mu1: DVector<f64>,
    pub mu2: DVector<f64>,
}

fn check_cp(sample: &Sample, cp: &ChangePointEstimate) -> Result<()> {
    if cp.index == 0 || cp.index >= sample.n() {
        return Err(invalid(format!(
            "change-point index {} incompatible with n = {}",
            cp.index,
            sample.n()
        )));
    }
    Ok(())
}

fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let rows = m.nrows() as f64;
    DVector::from_iterator(
        m.ncols(),
        m.column_iter()
            .map(|c| compensated_sum(c.iter().copied()) / rows),
    )
}

/// Sum of centered outer products `sum_i (z_i - c)(z_i - c)^T` over the rows of `m`.
fn centered_cross_products(m: &DMatrix<f64>, center: &DVector<f64>) -> DMatrix<f64> {
    let d = m.ncols();
    let mut out = DMatrix::zeros(d, d);
    for row in m.row_iter() {
        let dev = row.transpose() - center;
        out += &dev * dev.transpose();
    }
    out
}

pub fn segment_means(sample: &Sample, cp: &ChangePointEstimate) -> Result<SegmentMeans> {
    check_cp(sample, cp)?;
    let k = cp.pre_len();
    Ok(SegmentMeans {
        mu1: column_means(&sample.rows_range(0, k)),
        mu2: column_means(&sample.rows_range(k, sample.n())),
    })
}

/// Pooled within-segment covariance, each segment centered at its own mean,
/// normalized by the full sample size `n`.
pub fn pooled_centered_covariance(
    sample: &Sample,
    cp: &ChangePointEstimate,
) -> Result<DMatrix<f64>> {
    let means = segment_means(sample, cp)?;
    let k = cp.pre_len();
    let n = sample.n() as f64;
    let first = centered_cross_products(&sample.rows_range(0, k), &means.mu1);
    let second = centered_cross_products(&sample.rows_range(k, sample.n()), &means.mu2);
    Ok((first + second) / n)
}

/// Covariance built from within-segment first differences, normalized by `n`.
///
/// For i.i.d. data this estimates `2 Sigma`; halve it to estimate `Sigma`.
pub fn difference_based_covariance(
    sample: &Sample,
    cp: &ChangePointEstimate,
) -> Result<DMatrix<f64>> {
    check_cp(sample, cp)?;
    let k = cp.pre_len();
    let n = sample.n();
    if k < 2 || n - k < 2 {
        return Err(insufficient(format!(
            "difference estimator needs segments of length >= 2, got {} and {}",
            k,
            n - k
        )));
    }
    let d = sample.d();
    let data = sample.data();
    let mut out = DMatrix::zeros(d, d);
    for (start, end) in [(0, k), (k, n)] {
        for i in start + 1..end {
            let diff = (data.row(i) - data.row(i - 1)).transpose();
            out += &diff * diff.transpose();
        }
    }
    Ok(out / n as f64)
}

/// Least-squares slope of `x_t` on `x_{t-1}` (with intercept), clamped to
/// `[-0.99, 0.99]`. A series without variation in its lagged values gives 0.
pub fn ar1_coefficient(series: &[f64]) -> Result<f64> {
    let m = series.len();
    if m < 3 {
        return Err(insufficient(format!(
            "AR(1) fit needs at least 3 points, got {m}"
        )));
    }
    let lag = &series[..m - 1];
    let lead = &series[1..];
    let count = (m - 1) as f64;
    let lag_mean = compensated_sum(lag.iter().copied()) / count;
    let lead_mean = compensated_sum(lead.iter().copied()) / count;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (&a, &b) in lag.iter().zip(lead) {
        let da = a - lag_mean;
        sxy += da * (b - lead_mean);
        sxx += da * da;
    }
    let scale = lag.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if sxx <= f64::EPSILON * f64::EPSILON * scale * scale * count {
        return Ok(0.0);
    }
    Ok((sxy / sxx).clamp(-RHO_CLAMP, RHO_CLAMP))
}

/// AR(1) plug-in bandwidth for the Bartlett kernel on a segment of length `m`.
pub fn andrews_bandwidth(rho_hat: f64, m: usize) -> f64 {
    let r2 = rho_hat * rho_hat;
    let ratio = 4.0 * r2 * m as f64 / ((1.0 - r2) * (1.0 - r2));
    BARTLETT_BANDWIDTH_CONSTANT * ratio.cbrt()
}

/// Bartlett kernel weight `k(j / gamma)`; zero bandwidth keeps only lag 0.
pub fn bartlett_weight(lag: usize, gamma: f64) -> f64 {
    if lag == 0 {
        return 1.0;
    }
    if gamma <= 0.0 {
        return 0.0;
    }
    let x = lag as f64 / gamma;
    if x <= 1.0 {
        1.0 - x
    } else {
        0.0
    }
}

/// Bartlett HAC estimate of the long-run variance of `series` around `center`.
pub fn bartlett_lrv(series: &[f64], center: f64, gamma: f64) -> f64 {
    let m = series.len();
    if m == 0 {
        return 0.0;
    }
    let dev: Vec<f64> = series.iter().map(|x| x - center).collect();
    let mut total = compensated_sum(dev.iter().map(|e| e * e));
    for j in 1..m {
        let w = bartlett_weight(j, gamma);
        if w == 0.0 {
            break;
        }
        let cross = compensated_sum(dev[..m - j].iter().zip(&dev[j..]).map(|(a, b)| a * b));
        total += 2.0 * w * cross;
    }
    (total / m as f64).max(0.0)
}

/// Matrix version of [`bartlett_lrv`] over the rows of `seg`.
pub fn bartlett_lrv_matrix(seg: &DMatrix<f64>, center: &DVector<f64>, gamma: f64) -> DMatrix<f64> {
    let (m, d) = (seg.nrows(), seg.ncols());
    let mut out = DMatrix::zeros(d, d);
    if m == 0 {
        return out;
    }
    let dev = DMatrix::from_fn(m, d, |i, j| seg[(i, j)] - center[j]);
    out += dev.transpose() * &dev;
    for j in 1..m {
        let w = bartlett_weight(j, gamma);
        if w == 0.0 {
            break;
        }
        let head = dev.rows(0, m - j);
        let tail = dev.rows(j, m - j);
        let gamma_j = head.transpose() * tail;
        out += (&gamma_j + gamma_j.transpose()) * w;
    }
    out /= m as f64;
    // exact symmetry and nonnegative diagonal against rounding
    let sym = (&out + out.transpose()) * 0.5;
    let mut sym = sym;
    for i in 0..d {
        sym[(i, i)] = sym[(i, i)].max(0.0);
    }
    sym
}

/// Projection of a segment onto its leading principal direction.
fn leading_coordinate(seg: &DMatrix<f64>, center: &DVector<f64>) -> Vec<f64> {
    if seg.ncols() == 1 {
        return seg.column(0).iter().copied().collect();
    }
    let cov = centered_cross_products(seg, center);
    let eig = SymmetricEigen::new(cov);
    let lead = eig.eigenvalues.imax();
    let dir = eig.eigenvectors.column(lead).into_owned();
    seg.row_iter()
        .map(|r| (r.transpose() - center).dot(&dir))
        .collect()
}

/// HAC estimate for one segment. Segments shorter than 3 fall back to zero
/// bandwidth (plain variance), since no AR(1) fit is available.
pub(crate) fn segment_hac(seg: &DMatrix<f64>) -> (DMatrix<f64>, f64, f64) {
    let center = column_means(seg);
    let m = seg.nrows();
    let rho = if m >= 3 {
        ar1_coefficient(&leading_coordinate(seg, &center)).unwrap_or(0.0)
    } else {
        0.0
    };
    let gamma = if m >= 3 {
        andrews_bandwidth(rho, m)
    } else {
        0.0
    };
    (bartlett_lrv_matrix(seg, &center, gamma), gamma, rho)
}

pub(crate) fn split_lrv_lenient(
    transformed: &Sample,
    cp: &ChangePointEstimate,
) -> Result<LrvEstimate> {
    check_cp(transformed, cp)?;
    let k = cp.pre_len();
    let (v1, bandwidth1, rho1) = segment_hac(&transformed.rows_range(0, k));
    let (v2, bandwidth2, rho2) = segment_hac(&transformed.rows_range(k, transformed.n()));
    Ok(LrvEstimate {
        v1,
        v2,
        bandwidth1,
        bandwidth2,
        rho1,
        rho2,
    })
}

/// Segment-wise Bartlett HAC estimates with AR(1) plug-in bandwidths.
pub fn split_lrv(transformed: &Sample, cp: &ChangePointEstimate) -> Result<LrvEstimate> {
    check_cp(transformed, cp)?;
    let k = cp.pre_len();
    let rest = transformed.n() - k;
    if k < 3 || rest < 3 {
        return Err(insufficient(format!(
            "split LRV needs segments of length >= 3, got {k} and {rest}"
        )));
    }
    split_lrv_lenient(transformed, cp)
}
