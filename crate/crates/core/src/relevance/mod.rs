//! Tests for relevant changes `H0: ||theta_1 - theta_2|| <= Delta`.
//!
//! Every test estimates the squared distance with the integrated squared
//! CUSUM statistic
//!
//! ```text
//! M^2 = 3 / (t(1-t))^2 * (1/n) sum_i T_n(i)^2
//! ```
//!
//! and rejects when `M^2 >= Delta^2 + u_{1-alpha} tau / sqrt(n)`, where `tau^2`
//! is a plug-in estimate of the asymptotic variance of `sqrt(n) M^2`.

mod correlation;
mod decision;
mod distribution;
mod mean;
mod regression;
mod variance;

use serde::{Deserialize, Serialize};

use crate::cusum::ChangePointEstimate;
use crate::error::{invalid, Result};

pub use correlation::{correlation_cusum, correlation_statistic, CorrelationReport};
pub use decision::{asymptotic_power, decide, p_value};
pub use distribution::{
    cdf_l2_distance, distribution_cusum_terms, distribution_test, ecdf_l2_distance, pooled_grid,
    tau2_distribution, Cdf, Ecdf,
};
pub use mean::{mean_test, tau2_mean, tau2_mean_common};
pub use regression::{regression_sigma2, regression_test, tau2_regression};
pub use variance::{second_moment_transform, tau2_variance, variance_test};

/// Weight of the pre-break long-run variance in every `tau^2` formula.
pub fn pre_break_weight(t: f64) -> f64 {
    t * (5.0 - 10.0 * t + 6.0 * t * t)
}

/// Weight of the post-break long-run variance; equals `pre_break_weight(1 - t)`.
pub fn post_break_weight(t: f64) -> f64 {
    1.0 - 3.0 * t + 8.0 * t * t - 6.0 * t * t * t
}

/// How the long-run variances entering `tau^2` are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrvMode {
    /// Segment-wise Bartlett HAC with AR(1) plug-in bandwidth.
    HacBartlett,
    /// Lag-0 (i.i.d.) variance estimates.
    PlainVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Mean,
    Variance,
    Regression,
    Distribution,
    CorrelationStat,
}

impl TestKind {
    /// LRV mode used when the configuration leaves it unset.
    pub fn default_lrv_mode(self) -> LrvMode {
        match self {
            TestKind::Mean | TestKind::Variance => LrvMode::HacBartlett,
            TestKind::Regression | TestKind::Distribution | TestKind::CorrelationStat => {
                LrvMode::PlainVariance
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Mean => "mean",
            TestKind::Variance => "variance",
            TestKind::Regression => "regression",
            TestKind::Distribution => "distribution",
            TestKind::CorrelationStat => "correlation-stat",
        }
    }
}

/// Threshold, level and estimator options shared by all tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceConfig {
    /// Relevance threshold, in units of the norm of the target parameter.
    pub delta: f64,
    pub alpha: f64,
    /// Subtract `trace(Sigma_hat) / (6n)` from the mean statistic.
    #[serde(default)]
    pub bias_correction: bool,
    /// `None` selects the test's default (see [`TestKind::default_lrv_mode`]).
    #[serde(default)]
    pub lrv_mode: Option<LrvMode>,
}

impl RelevanceConfig {
    pub fn new(delta: f64, alpha: f64) -> Result<Self> {
        let config = Self {
            delta,
            alpha,
            bias_correction: false,
            lrv_mode: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_lrv_mode(mut self, mode: LrvMode) -> Self {
        self.lrv_mode = Some(mode);
        self
    }

    pub fn with_bias_correction(mut self, on: bool) -> Self {
        self.bias_correction = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(invalid(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn lrv_mode_for(&self, kind: TestKind) -> LrvMode {
        self.lrv_mode.unwrap_or_else(|| kind.default_lrv_mode())
    }
}

/// Parameter estimates before and after the estimated change point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEstimates {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
}

/// Outcome of a relevance test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub test: TestKind,
    pub n: usize,
    pub delta: f64,
    pub alpha: f64,
    pub m_hat_squared: f64,
    pub tau_hat_squared: f64,
    pub t_hat: f64,
    pub break_index: usize,
    pub p_value: f64,
    pub reject: bool,
    pub critical_value: f64,
    /// `tau_hat^2 == 0`; the decision reduces to `M^2 >= Delta^2`.
    pub degenerate: bool,
    pub segment_estimates: SegmentEstimates,
    pub lrv_mode: LrvMode,
    pub bias_correction: bool,
}

pub(crate) const MIN_TEST_LEN: usize = 10;

pub(crate) fn check_len(n: usize) -> Result<()> {
    if n < MIN_TEST_LEN {
        return Err(invalid(format!(
            "tests need at least {MIN_TEST_LEN} observations, got {n}"
        )));
    }
    Ok(())
}

pub(crate) struct ReportParts {
    pub kind: TestKind,
    pub n: usize,
    pub m_hat_squared: f64,
    pub tau_hat_squared: f64,
    pub cp: ChangePointEstimate,
    pub segment_estimates: SegmentEstimates,
    pub lrv_mode: LrvMode,
}

pub(crate) fn assemble_report(parts: ReportParts, config: &RelevanceConfig) -> RelevanceReport {
    let tau2 = parts.tau_hat_squared.max(0.0);
    let (reject, critical_value) = decide(parts.m_hat_squared, tau2.sqrt(), config, parts.n);
    RelevanceReport {
        test: parts.kind,
        n: parts.n,
        delta: config.delta,
        alpha: config.alpha,
        m_hat_squared: parts.m_hat_squared,
        tau_hat_squared: tau2,
        t_hat: parts.cp.t_hat,
        break_index: parts.cp.index,
        p_value: p_value(parts.m_hat_squared, tau2, config.delta, parts.n),
        reject,
        critical_value,
        degenerate: !(tau2 > 0.0),
        segment_estimates: parts.segment_estimates,
        lrv_mode: parts.lrv_mode,
        bias_correction: config.bias_correction && parts.kind == TestKind::Mean,
    }
}
