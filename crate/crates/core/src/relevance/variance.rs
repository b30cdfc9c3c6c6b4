use nalgebra::DMatrix;

use super::{
    assemble_report, check_len, post_break_weight, pre_break_weight, LrvMode, RelevanceConfig,
    RelevanceReport, ReportParts, SegmentEstimates, TestKind,
};
use crate::cusum::{cusum_process, estimate_changepoint, integrated_squared_cusum, mhat_squared};
use crate::error::Result;
use crate::lrv::{pooled_centered_covariance, segment_means, split_lrv_lenient};
use crate::sample::Sample;

/// Row `i` of the result is `vec(Z_i Z_i^T)` (column-major, `d^2` entries).
pub fn second_moment_transform(sample: &Sample) -> Sample {
    let (n, d) = (sample.n(), sample.d());
    let data = sample.data();
    let out = DMatrix::from_fn(n, d * d, |i, c| data[(i, c % d)] * data[(i, c / d)]);
    Sample::new(out).expect("products of finite entries are finite")
}

/// Asymptotic variance of the variance statistic.
///
/// `d_sigma` is the `d x d` difference `Sigma_1 - Sigma_2`; `v1`, `v2` are the
/// `d^2 x d^2` long-run covariances of `vec(Z Z^T)` in each segment. The
/// quadratic form `vec(D)' [a(t) V1 + b(t) V2] vec(D)` reduces to the scalar
/// trace expression for `d = 1`.
pub fn tau2_variance(t: f64, d_sigma: &DMatrix<f64>, v1: &DMatrix<f64>, v2: &DMatrix<f64>) -> f64 {
    let d2 = d_sigma.len();
    assert_eq!(v1.shape(), (d2, d2), "v1 must be d^2 x d^2");
    assert_eq!(v2.shape(), (d2, d2), "v2 must be d^2 x d^2");
    let vec_d = nalgebra::DVector::from_column_slice(d_sigma.as_slice());
    let weighted = v1 * pre_break_weight(t) + v2 * post_break_weight(t);
    let quad = (vec_d.transpose() * weighted * &vec_d)[(0, 0)];
    4.0 / (5.0 * (t * (1.0 - t)).powi(2)) * quad
}

/// Test for a relevant change in the covariance matrix (Frobenius norm),
/// assuming a constant mean.
pub fn variance_test(sample: &Sample, config: &RelevanceConfig) -> Result<RelevanceReport> {
    config.validate()?;
    check_len(sample.n())?;
    let n = sample.n();
    let d = sample.d();
    let moments = second_moment_transform(sample);
    let process = cusum_process(&moments);
    let cp = estimate_changepoint(&process);
    let m2 = mhat_squared(integrated_squared_cusum(&process), &cp, None);

    let means = segment_means(&moments, &cp)?;
    let mode = config.lrv_mode_for(TestKind::Variance);
    let (v1, v2) = match mode {
        LrvMode::HacBartlett => {
            let est = split_lrv_lenient(&moments, &cp)?;
            (est.v1, est.v2)
        }
        LrvMode::PlainVariance => {
            let pooled = pooled_centered_covariance(&moments, &cp)?;
            (pooled.clone(), pooled)
        }
    };
    let diff = &means.mu1 - &means.mu2;
    let d_sigma = DMatrix::from_column_slice(d, d, diff.as_slice());
    let tau2 = tau2_variance(cp.t_hat, &d_sigma, &v1, &v2);

    Ok(assemble_report(
        ReportParts {
            kind: TestKind::Variance,
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

    #[test]
    fn scalar_reduction() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!((tau2_variance(0.5, &one, &one, &one) - 19.2).abs() < 1e-12);
        let zero = DMatrix::zeros(1, 1);
        assert_eq!(tau2_variance(0.4, &zero, &one, &one), 0.0);
    }

    #[test]
    fn orthogonal_conjugation_invariance() {
        let (c, s) = (0.6_f64, 0.8_f64);
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let qq = q.kronecker(&q);
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, -0.7]);
        let a = DMatrix::from_fn(4, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let v1 = &a * a.transpose();
        let b = DMatrix::from_fn(4, 4, |i, j| ((i + 2 * j) % 5) as f64 - 1.5);
        let v2 = &b * b.transpose();
        let base = tau2_variance(0.37, &d, &v1, &v2);
        let d_rot = &q * &d * q.transpose();
        let v1_rot = &qq * &v1 * qq.transpose();
        let v2_rot = &qq * &v2 * qq.transpose();
        let rotated = tau2_variance(0.37, &d_rot, &v1_rot, &v2_rot);
        assert!((base - rotated).abs() < 1e-10 * base.abs());
    }

    #[test]
    fn transform_layout() {
        let s = Sample::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap();
        let w = second_moment_transform(&s);
        assert_eq!(w.d(), 4);
        assert_eq!(w.row(0).as_slice(), &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(w.row(1).as_slice(), &[9.0, -3.0, -3.0, 1.0]);
    }

    #[test]
    fn scaling_multiplies_statistic_by_c4() {
        let vals: Vec<f64> = (0..60)
            .map(|i| (i as f64 * 0.77).sin() * if i < 30 { 1.0 } else { 2.5 })
            .collect();
        let s = Sample::from_slice(&vals).unwrap();
        let c = 1.7;
        let cfg = RelevanceConfig::new(1.0, 0.05).unwrap();
        let base = variance_test(&s, &cfg).unwrap();
        let scaled = variance_test(&s.map(|v| c * v).unwrap(), &cfg).unwrap();
        let ratio = scaled.m_hat_squared / base.m_hat_squared;
        assert!((ratio - c.powi(4)).abs() < 1e-10);
        assert_eq!(base.break_index, scaled.break_index);
    }
}
