use super::{
    assemble_report, check_len, LrvMode, RelevanceConfig, RelevanceReport, ReportParts,
    SegmentEstimates, TestKind,
};
use crate::cusum::{
    compensated_sum, cusum_process, estimate_changepoint, integrated_squared_cusum, mhat_squared,
};
use crate::error::{insufficient, invalid, Result};
use crate::lrv::{andrews_bandwidth, ar1_coefficient, bartlett_lrv};
use crate::sample::Sample;

/// Asymptotic variance of `sqrt(n) * (1/n) sum T_n(i)^2` for the slope of
/// `Y = beta X + eps` with one break:
///
/// ```text
/// 4 (b1-b2)^2 t^2 (1-t)^2 / (45 B^2) * { V1 (1 + 2t(1-t))
///     + V0 [5t(1-t)((1-t) b1 + t b2)^2 + t^3 b1^2 + (1-t)^3 b2^2] }
/// ```
///
/// with `B = E[X^2]`, `V0` the long-run variance of `X^2` and `V1` that of `X eps`.
pub fn regression_sigma2(t: f64, beta1: f64, beta2: f64, b: f64, v0: f64, v1: f64) -> f64 {
    let s = 1.0 - t;
    let db = beta1 - beta2;
    let mix = s * beta1 + t * beta2;
    let bracket = v1 * (1.0 + 2.0 * s * t)
        + v0 * (5.0 * t * s * mix * mix + t.powi(3) * beta1 * beta1 + s.powi(3) * beta2 * beta2);
    4.0 * db * db * t * t * s * s / (45.0 * b * b) * bracket
}

/// `9 sigma^2 / (t(1-t))^4` with `sigma^2` from [`regression_sigma2`].
pub fn tau2_regression(t: f64, beta1: f64, beta2: f64, b: f64, v0: f64, v1: f64) -> f64 {
    9.0 * regression_sigma2(t, beta1, beta2, b, v0, v1) / (t * (1.0 - t)).powi(4)
}

fn ols_through_origin(x: &[f64], y: &[f64]) -> Result<f64> {
    let sxx = compensated_sum(x.iter().map(|v| v * v));
    if sxx <= 0.0 {
        return Err(insufficient("segment has no variation in the regressor"));
    }
    Ok(compensated_sum(x.iter().zip(y).map(|(a, b)| a * b)) / sxx)
}

fn mean(values: &[f64]) -> f64 {
    compensated_sum(values.iter().copied()) / values.len() as f64
}

/// Long-run variance of a segment; HAC with the AR(1) plug-in bandwidth when
/// the segment has at least 3 points, lag-0 variance otherwise.
fn segment_variance(values: &[f64], mode: LrvMode) -> f64 {
    let center = mean(values);
    let gamma = match mode {
        LrvMode::HacBartlett if values.len() >= 3 => {
            andrews_bandwidth(ar1_coefficient(values).unwrap_or(0.0), values.len())
        }
        _ => 0.0,
    };
    bartlett_lrv(values, center, gamma)
}

/// Test for a relevant change in the slope of `Y = beta X + eps`.
pub fn regression_test(x: &[f64], y: &[f64], config: &RelevanceConfig) -> Result<RelevanceReport> {
    config.validate()?;
    if x.len() != y.len() {
        return Err(invalid(format!(
            "regressor and response lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    check_len(x.len())?;
    let n = x.len();
    let nf = n as f64;
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let b_hat = compensated_sum(x.iter().map(|v| v * v)) / nf;
    if !(b_hat > 0.0) {
        return Err(invalid(
            "regressor is identically zero; slope not identifiable",
        ));
    }

    let mut process = cusum_process(&Sample::from_slice(&xy)?);
    process.scale(1.0 / b_hat);
    let cp = estimate_changepoint(&process);
    let m2 = mhat_squared(integrated_squared_cusum(&process), &cp, None);

    let k = cp.pre_len();
    let beta1 = ols_through_origin(&x[..k], &y[..k])?;
    let beta2 = ols_through_origin(&x[k..], &y[k..])?;
    let score: Vec<f64> = x
        .iter()
        .zip(y)
        .enumerate()
        .map(|(i, (&xi, &yi))| {
            let beta = if i < k { beta1 } else { beta2 };
            xi * (yi - beta * xi)
        })
        .collect();

    let mode = config.lrv_mode_for(TestKind::Regression);
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let v0 = match mode {
        LrvMode::PlainVariance => bartlett_lrv(&x2, b_hat, 0.0),
        LrvMode::HacBartlett => {
            let gamma = andrews_bandwidth(ar1_coefficient(&x2)?, n);
            bartlett_lrv(&x2, b_hat, gamma)
        }
    };
    let (s1, s2) = score.split_at(k);
    let v1 = (k as f64 / nf) * segment_variance(s1, mode)
        + ((n - k) as f64 / nf) * segment_variance(s2, mode);

    let tau2 = tau2_regression(cp.t_hat, beta1, beta2, b_hat, v0, v1);
    Ok(assemble_report(
        ReportParts {
            kind: TestKind::Regression,
            n,
            m_hat_squared: m2,
            tau_hat_squared: tau2,
            cp,
            segment_estimates: SegmentEstimates {
                before: vec![beta1],
                after: vec![beta2],
            },
            lrv_mode: mode,
        },
        config,
    ))
}
