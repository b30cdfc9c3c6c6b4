use nalgebra::{DMatrix, DVector};

use super::{
    assemble_report, check_len, post_break_weight, pre_break_weight, LrvMode, RelevanceConfig,
    RelevanceReport, ReportParts, SegmentEstimates, TestKind,
};
use crate::cusum::{cusum_process, estimate_changepoint, integrated_squared_cusum, mhat_squared};
use crate::error::Result;
use crate::lrv::{pooled_centered_covariance, segment_means, split_lrv_lenient};
use crate::sample::Sample;

/// Asymptotic variance of the mean statistic with segment long-run
/// covariances `v1`, `v2`:
///
/// ```text
/// 4 / (5 (t(1-t))^2) * dmu' { t(5-10t+6t^2) V1 + (1-3t+8t^2-6t^3) V2 } dmu
/// ```
pub fn tau2_mean(t: f64, dmu: &DVector<f64>, v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> f64 {
    let weighted = v1 * pre_break_weight(t) + v2 * post_break_weight(t);
    let quad = (dmu.transpose() * weighted * dmu)[(0, 0)];
    4.0 / (5.0 * (t * (1.0 - t)).powi(2)) * quad
}

/// Asymptotic variance when both segments share the covariance `sigma`:
/// `dmu' Sigma dmu * 4 (1 + 2t(1-t)) / (5 t^2 (1-t)^2)`.
pub fn tau2_mean_common(t: f64, dmu: &DVector<f64>, sigma: &DMatrix<f64>) -> f64 {
    let quad = (dmu.transpose() * sigma * dmu)[(0, 0)];
    quad * 4.0 * (1.0 + 2.0 * t * (1.0 - t)) / (5.0 * t * t * (1.0 - t) * (1.0 - t))
}

/// Test for a relevant change in the mean vector (Euclidean norm).
pub fn mean_test(sample: &Sample, config: &RelevanceConfig) -> Result<RelevanceReport> {
    config.validate()?;
    check_len(sample.n())?;
    let n = sample.n();
    let process = cusum_process(sample);
    let cp = estimate_changepoint(&process);
    let integral = integrated_squared_cusum(&process);
    let means = segment_means(sample, &cp)?;
    let pooled = pooled_centered_covariance(sample, &cp)?;

    let correction = config
        .bias_correction
        .then(|| pooled.trace() / (6.0 * n as f64));
    let m2 = mhat_squared(integral, &cp, correction);

    let mode = config.lrv_mode_for(TestKind::Mean);
    let (v1, v2) = match mode {
        LrvMode::HacBartlett => {
            let est = split_lrv_lenient(sample, &cp)?;
            (est.v1, est.v2)
        }
        LrvMode::PlainVariance => (pooled.clone(), pooled),
    };
    let dmu = &means.mu1 - &means.mu2;
    let tau2 = tau2_mean(cp.t_hat, &dmu, &v1, &v2);

    Ok(assemble_report(
        ReportParts {
            kind: TestKind::Mean,
            n,
            m_hat_squared: m2,
            tau_hat_squared: tau2,
            cp,
            segment_estimates: SegmentEstimates {
                before: means.mu1.iter().copied().collect(),
                after: means.mu2.iter().copied().collect(),
            },
            lrv_mode: mode,
        },
        config,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn tau2_mean_examples() {
        let dmu = DVector::from_element(1, 1.0);
        assert!((tau2_mean(0.5, &dmu, &scalar(1.0), &scalar(1.0)) - 19.2).abs() < 1e-12);
        assert_eq!(
            tau2_mean(0.3, &DVector::zeros(1), &scalar(2.0), &scalar(3.0)),
            0.0
        );
    }

    #[test]
    fn common_covariance_identity() {
        let dmu = DVector::from_vec(vec![0.7, -1.1]);
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        for i in 1..50 {
            let t = i as f64 / 50.0;
            let a = tau2_mean(t, &dmu, &sigma, &sigma);
            let b = tau2_mean_common(t, &dmu, &sigma);
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn constant_sample_does_not_reject() {
        let s = Sample::from_slice(&[3.0; 20]).unwrap();
        let r = mean_test(&s, &RelevanceConfig::new(1.0, 0.05).unwrap()).unwrap();
        assert_eq!(r.m_hat_squared, 0.0);
        assert!(!r.reject);
        assert!(r.degenerate);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn step_sample_statistic() {
        let vals: Vec<f64> = (0..12).map(|i| if i < 6 { 0.0 } else { 1.0 }).collect();
        let s = Sample::from_slice(&vals).unwrap();
        let r = mean_test(&s, &RelevanceConfig::new(2.0, 0.05).unwrap()).unwrap();
        // integral of the noiseless step scales as (t(1-t))^2/3 + O(1/n^2)
        let p = cusum_process(&s);
        let expected = 3.0 / 0.0625 * integrated_squared_cusum(&p);
        assert!((r.m_hat_squared - expected).abs() < 1e-12);
        assert_eq!(r.break_index, 6);
        assert!(!r.reject);
        assert!(r.degenerate);
    }

    #[test]
    fn short_sample_rejected() {
        let s = Sample::from_slice(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(mean_test(&s, &RelevanceConfig::new(1.0, 0.05).unwrap()).is_err());
    }

    #[test]
    fn bias_correction_lowers_statistic() {
        let vals: Vec<f64> = (0..40)
            .map(|i| (i as f64 * 1.7).sin() + if i >= 20 { 1.5 } else { 0.0 })
            .collect();
        let s = Sample::from_slice(&vals).unwrap();
        let base = RelevanceConfig::new(1.0, 0.05).unwrap();
        let plain = mean_test(&s, &base).unwrap();
        let corrected = mean_test(&s, &base.with_bias_correction(true)).unwrap();
        let pooled = pooled_centered_covariance(
            &s,
            &crate::ChangePointEstimate::new(plain.break_index, 40).unwrap(),
        )
        .unwrap();
        let expected = plain.m_hat_squared - pooled.trace() / 240.0;
        assert!((corrected.m_hat_squared - expected).abs() < 1e-12);
        assert!(corrected.bias_correction);
    }
}
