use serde::{Deserialize, Serialize};

use super::check_len;
use crate::cusum::{
    compensated_sum, cusum_process, estimate_changepoint, integrated_squared_cusum, mhat_squared,
    CusumProcess,
};
use crate::error::{invalid, Result};
use crate::sample::Sample;

/// Uncalibrated CUSUM summary for a correlation break. No asymptotic variance
/// is available, so neither a p-value nor a decision is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub m_hat_squared: f64,
    pub t_hat: f64,
    pub break_index: usize,
    pub correlation_before: f64,
    pub correlation_after: f64,
    pub calibrated: bool,
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m1 = compensated_sum(values.iter().copied()) / n;
    let m2 = compensated_sum(values.iter().map(|v| v * v)) / n;
    (m1, m2)
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, _) = moments(x);
    let (my, _) = moments(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx > 0.0 && syy > 0.0 {
        sxy / (sxx * syy).sqrt()
    } else {
        f64::NAN
    }
}

/// CUSUM of the cross products `X_j Y_j`, standardized by the full-sample
/// marginal variances `(mu2 - mu1^2)(nu2 - nu1^2)`.
pub fn correlation_cusum(pairs: &Sample) -> Result<CusumProcess> {
    if pairs.d() != 2 {
        return Err(invalid(format!(
            "correlation needs 2 columns, got {}",
            pairs.d()
        )));
    }
    let x = pairs.column(0);
    let y = pairs.column(1);
    let (mu1, mu2) = moments(&x);
    let (nu1, nu2) = moments(&y);
    let var_x = mu2 - mu1 * mu1;
    let var_y = nu2 - nu1 * nu1;
    if !(var_x > 0.0 && var_y > 0.0) {
        return Err(invalid(
            "correlation CUSUM needs positive marginal variances",
        ));
    }
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let mut process = cusum_process(&Sample::from_slice(&xy)?);
    process.scale(1.0 / (var_x * var_y).sqrt());
    Ok(process)
}

/// Break location and squared-distance estimate for a correlation change.
pub fn correlation_statistic(pairs: &Sample) -> Result<CorrelationReport> {
    check_len(pairs.n())?;
    let process = correlation_cusum(pairs)?;
    let cp = estimate_changepoint(&process);
    let m2 = mhat_squared(integrated_squared_cusum(&process), &cp, None);
    let x = pairs.column(0);
    let y = pairs.column(1);
    let k = cp.pre_len();
    Ok(CorrelationReport {
        n: pairs.n(),
        m_hat_squared: m2,
        t_hat: cp.t_hat,
        break_index: cp.index,
        correlation_before: pearson(&x[..k], &y[..k]),
        correlation_after: pearson(&x[k..], &y[k..]),
        calibrated: false,
    })
}
