use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::dgp::{gen_ar1, gen_chi2_standardized, gen_iid_gaussian, gen_regression, RegressorLaw};
use super::rng::replication_rng;
use crate::cusum::CompensatedSum;
use crate::error::{invalid, Result};
use crate::normal::normal_cdf;
use crate::relevance::{
    asymptotic_power, cdf_l2_distance, distribution_test, mean_test, regression_test,
    tau2_distribution, tau2_mean, tau2_regression, tau2_variance, variance_test, RelevanceConfig,
    RelevanceReport, TestKind,
};
use crate::sample::Sample;
use nalgebra::DMatrix;

fn one() -> f64 {
    1.0
}

fn default_burn_in() -> usize {
    1000
}

fn default_law() -> RegressorLaw {
    RegressorLaw::Normal
}

/// Data generating process of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dgp {
    IidGaussian {
        #[serde(default)]
        mu1: f64,
        mu2: f64,
        #[serde(default = "one")]
        sd1: f64,
        #[serde(default = "one")]
        sd2: f64,
    },
    Ar1MeanShift {
        rho: f64,
        delta: f64,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
    },
    Chi2Switch {
        df: f64,
    },
    RegressionSlope {
        #[serde(default)]
        beta1: f64,
        beta2: f64,
        #[serde(default = "default_law")]
        regressor: RegressorLaw,
        #[serde(default = "one")]
        noise_sd: f64,
    },
}

/// One Monte Carlo experiment: data law, sample size, test and replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub dgp: Dgp,
    pub n: usize,
    /// Break fraction; the first `floor(n t)` observations are pre-break.
    pub t: f64,
    pub test: TestKind,
    pub config: RelevanceConfig,
    pub reps: usize,
    pub master_seed: u64,
}

/// Aggregated outcome of [`run_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub rejection_rate: f64,
    /// `sqrt(r (1 - r) / reps_completed)`.
    pub mc_standard_error: f64,
    pub mean_t_hat: f64,
    /// Asymptotic rejection probability at the true parameters, if available.
    pub predicted_power: Option<f64>,
    /// True distance between the pre- and post-break parameters, if available.
    pub true_distance: Option<f64>,
    pub reps_completed: usize,
    pub rejections: usize,
    /// Replications whose variance estimate was zero.
    pub degenerate_count: usize,
    /// Replications where the test returned an error; excluded from the rate.
    pub failed_reps: usize,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.reps == 0 {
            return Err(invalid("reps must be at least 1"));
        }
        if !(self.t > 0.0 && self.t < 1.0) {
            return Err(invalid(format!(
                "break fraction must lie in (0, 1), got {}",
                self.t
            )));
        }
        let nf = self.n as f64;
        if self.t * nf < 2.0 || (1.0 - self.t) * nf < 2.0 {
            return Err(invalid(format!(
                "each segment needs at least 2 observations (n = {}, t = {})",
                self.n, self.t
            )));
        }
        let regression_dgp = matches!(self.dgp, Dgp::RegressionSlope { .. });
        match self.test {
            TestKind::CorrelationStat => {
                return Err(invalid(
                    "the correlation statistic has no calibrated decision",
                ));
            }
            TestKind::Regression if !regression_dgp => {
                return Err(invalid(
                    "the regression test needs the regression_slope process",
                ));
            }
            TestKind::Mean | TestKind::Variance | TestKind::Distribution if regression_dgp => {
                return Err(invalid(format!(
                    "the {} test needs a univariate process",
                    self.test.as_str()
                )));
            }
            _ => {}
        }
        let finite = |v: f64| v.is_finite();
        let ok = match self.dgp {
            Dgp::IidGaussian { mu1, mu2, sd1, sd2 } => {
                finite(mu1) && finite(mu2) && sd1 > 0.0 && sd2 > 0.0 && finite(sd1) && finite(sd2)
            }
            Dgp::Ar1MeanShift { rho, delta, .. } => rho.abs() < 1.0 && finite(delta),
            Dgp::Chi2Switch { df } => df > 0.0 && finite(df),
            Dgp::RegressionSlope {
                beta1,
                beta2,
                noise_sd,
                ..
            } => finite(beta1) && finite(beta2) && noise_sd >= 0.0 && finite(noise_sd),
        };
        if !ok {
            return Err(invalid(format!(
                "process parameters out of range: {:?}",
                self.dgp
            )));
        }
        Ok(())
    }

    /// Runs replication `rep` on the data of [`replication_sample`].
    pub fn replicate(&self, rep: u64) -> Result<RelevanceReport> {
        let sample = replication_sample(self, rep)?;
        match self.test {
            TestKind::Mean => mean_test(&sample, &self.config),
            TestKind::Variance => variance_test(&sample, &self.config),
            TestKind::Distribution => distribution_test(&sample.column(0), &self.config),
            TestKind::Regression => {
                regression_test(&sample.column(0), &sample.column(1), &self.config)
            }
            TestKind::CorrelationStat => Err(invalid("correlation statistic has no decision")),
        }
    }

    /// True `(||theta_1 - theta_2||, tau^2)` for the scenario, when known in
    /// closed form or by quadrature.
    pub fn true_parameters(&self) -> Option<(f64, f64)> {
        let t = self.t;
        let scalar = |v: f64| DMatrix::from_element(1, 1, v);
        match (self.test, &self.dgp) {
            (TestKind::Mean, &Dgp::IidGaussian { mu1, mu2, sd1, sd2 }) => {
                let dmu = nalgebra::DVector::from_element(1, mu1 - mu2);
                Some((
                    (mu1 - mu2).abs(),
                    tau2_mean(t, &dmu, &scalar(sd1 * sd1), &scalar(sd2 * sd2)),
                ))
            }
            (TestKind::Mean, &Dgp::Ar1MeanShift { rho, delta, .. }) => {
                let lrv = 1.0 / ((1.0 - rho) * (1.0 - rho));
                let dmu = nalgebra::DVector::from_element(1, delta);
                Some((delta.abs(), tau2_mean(t, &dmu, &scalar(lrv), &scalar(lrv))))
            }
            (TestKind::Variance, &Dgp::IidGaussian { mu1, mu2, sd1, sd2 }) => {
                let m = |mu: f64, sd: f64| mu * mu + sd * sd;
                let v = |mu: f64, sd: f64| 2.0 * sd.powi(4) + 4.0 * mu * mu * sd * sd;
                let diff = m(mu1, sd1) - m(mu2, sd2);
                let tau2 =
                    tau2_variance(t, &scalar(diff), &scalar(v(mu1, sd1)), &scalar(v(mu2, sd2)));
                Some((diff.abs(), tau2))
            }
            (TestKind::Distribution, &Dgp::IidGaussian { mu1, mu2, sd1, sd2 }) => {
                let f1 = move |z: f64| normal_cdf((z - mu1) / sd1);
                let f2 = move |z: f64| normal_cdf((z - mu2) / sd2);
                let lo = (mu1 - 12.0 * sd1).min(mu2 - 12.0 * sd2);
                let hi = (mu1 + 12.0 * sd1).max(mu2 + 12.0 * sd2);
                let grid = uniform_grid(lo, hi, 200_000);
                Some((
                    cdf_l2_distance(&f1, &f2, &grid),
                    tau2_distribution(t, &f1, &f2, &grid),
                ))
            }
            (TestKind::Distribution, &Dgp::Chi2Switch { df }) => {
                let grid = chi2_switch_grid(df)?;
                let chi = ChiSquared::new(df).ok()?;
                let scale = (2.0 * df).sqrt();
                let f2 = move |z: f64| chi.cdf((scale * z + df).max(0.0));
                Some((
                    cdf_l2_distance(&normal_cdf, &f2, &grid),
                    tau2_distribution(t, &normal_cdf, &f2, &grid),
                ))
            }
            (
                TestKind::Regression,
                &Dgp::RegressionSlope {
                    beta1,
                    beta2,
                    regressor,
                    noise_sd,
                },
            ) => {
                let v0 = regressor.fourth_moment_variance();
                let tau2 = tau2_regression(t, beta1, beta2, 1.0, v0, noise_sd * noise_sd);
                Some(((beta1 - beta2).abs(), tau2))
            }
            _ => None,
        }
    }

    /// Asymptotic rejection probability at the true parameters.
    pub fn predicted_power(&self) -> Option<f64> {
        let (dist, tau2) = self.true_parameters()?;
        if !(tau2 > 0.0) {
            return None;
        }
        Some(asymptotic_power(
            dist,
            self.config.delta,
            tau2.sqrt(),
            self.n,
            self.config.alpha,
        ))
    }
}

fn uniform_grid(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    (0..=cells)
        .map(|i| lo + (hi - lo) * i as f64 / cells as f64)
        .collect()
}

/// Grid covering both the standard normal and the standardized chi-square
/// law up to negligible tail mass, refined near the chi-square lower end
/// where its density is unbounded for `df < 2`.
fn chi2_switch_grid(df: f64) -> Option<Vec<f64>> {
    let chi = ChiSquared::new(df).ok()?;
    let scale = (2.0 * df).sqrt();
    let lower_end = -df / scale;
    let upper = ((chi.inverse_cdf(1.0 - 1e-12) - df) / scale).max(9.0);
    let mut grid = uniform_grid(-9.0, upper, 400_000);
    grid.extend(uniform_grid(lower_end, lower_end + 0.05, 20_000));
    grid.push(lower_end);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Some(grid)
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| invalid(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Runs all replications of `spec` on `workers` threads (`None` uses the
/// global pool). The result does not depend on the number of workers.
pub fn run_scenario(spec: &ScenarioSpec, workers: Option<usize>) -> Result<ScenarioResult> {
    spec.validate()?;
    let outcomes: Vec<Option<(bool, f64, bool)>> = in_pool(workers, || {
        (0..spec.reps as u64)
            .into_par_iter()
            .map(|rep| {
                spec.replicate(rep)
                    .ok()
                    .map(|r| (r.reject, r.t_hat, r.degenerate))
            })
            .collect()
    })?;

    let mut rejections = 0;
    let mut degenerate_count = 0;
    let mut failed_reps = 0;
    let mut t_sum = CompensatedSum::default();
    for outcome in &outcomes {
        match outcome {
            Some((reject, t_hat, degenerate)) => {
                rejections += usize::from(*reject);
                degenerate_count += usize::from(*degenerate);
                t_sum.add(*t_hat);
            }
            None => failed_reps += 1,
        }
    }
    let completed = spec.reps - failed_reps;
    if completed == 0 {
        return Err(invalid("every replication failed"));
    }
    let rate = rejections as f64 / completed as f64;
    Ok(ScenarioResult {
        rejection_rate: rate,
        mc_standard_error: (rate * (1.0 - rate) / completed as f64).sqrt(),
        mean_t_hat: t_sum.value() / completed as f64,
        predicted_power: spec.predicted_power(),
        true_distance: spec.true_parameters().map(|p| p.0),
        reps_completed: completed,
        rejections,
        degenerate_count,
        failed_reps,
    })
}

/// Scenario parameter varied along a power curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Relevance threshold `Delta`.
    Threshold,
    /// Size of the change: `mu2 - mu1`, the AR(1) shift, or `beta2 - beta1`.
    Shift,
    /// Chi-square degrees of freedom.
    Df,
    /// Common standard deviation of both Gaussian segments.
    Sd,
    /// Standard deviation of the second Gaussian segment only.
    Sd2,
    /// AR(1) coefficient.
    Rho,
    /// Sample size.
    N,
}

/// Grid of values for one [`SweepParameter`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Threshold => "threshold",
            SweepParameter::Shift => "shift",
            SweepParameter::Df => "df",
            SweepParameter::Sd => "sd",
            SweepParameter::Sd2 => "sd2",
            SweepParameter::Rho => "rho",
            SweepParameter::N => "n",
        }
    }

    /// Copy of `spec` with this parameter set to `value`.
    pub fn apply(self, spec: &ScenarioSpec, value: f64) -> Result<ScenarioSpec> {
        let mut out = spec.clone();
        let mismatch = || invalid(format!("cannot sweep {} for {:?}", self.as_str(), spec.dgp));
        match (self, &mut out.dgp) {
            (SweepParameter::Threshold, _) => out.config.delta = value,
            (SweepParameter::N, _) => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(invalid(format!(
                        "sample size must be a positive integer, got {value}"
                    )));
                }
                out.n = value as usize;
            }
            (SweepParameter::Shift, Dgp::IidGaussian { mu1, mu2, .. }) => *mu2 = *mu1 + value,
            (SweepParameter::Shift, Dgp::Ar1MeanShift { delta, .. }) => *delta = value,
            (SweepParameter::Shift, Dgp::RegressionSlope { beta1, beta2, .. }) => {
                *beta2 = *beta1 + value
            }
            (SweepParameter::Df, Dgp::Chi2Switch { df }) => *df = value,
            (SweepParameter::Sd, Dgp::IidGaussian { sd1, sd2, .. }) => {
                *sd1 = value;
                *sd2 = value;
            }
            (SweepParameter::Sd2, Dgp::IidGaussian { sd2, .. }) => *sd2 = value,
            (SweepParameter::Rho, Dgp::Ar1MeanShift { rho, .. }) => *rho = value,
            _ => return Err(mismatch()),
        }
        out.validate()?;
        Ok(out)
    }
}

/// One grid point of a power curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub grid_value: f64,
    pub result: ScenarioResult,
}

/// Runs `spec` once per grid value. All grid points share the master seed.
pub fn power_curve(
    spec: &ScenarioSpec,
    sweep: &Sweep,
    workers: Option<usize>,
) -> Result<Vec<PowerPoint>> {
    if sweep.values.is_empty() {
        return Err(invalid("sweep grid is empty"));
    }
    sweep
        .values
        .iter()
        .map(|&v| {
            let point = sweep.parameter.apply(spec, v)?;
            Ok(PowerPoint {
                grid_value: v,
                result: run_scenario(&point, workers)?,
            })
        })
        .collect()
}

/// Empirical against predicted rejection probability at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub grid_value: f64,
    pub empirical: f64,
    pub predicted: f64,
    /// `empirical - predicted`.
    pub gap: f64,
    pub mc_standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticComparison {
    pub rows: Vec<GapRow>,
    pub max_abs_gap: f64,
}

/// Power curve together with its gaps to the asymptotic approximation.
pub fn compare_asymptotic(
    spec: &ScenarioSpec,
    sweep: &Sweep,
    workers: Option<usize>,
) -> Result<AsymptoticComparison> {
    let curve = power_curve(spec, sweep, workers)?;
    let rows = curve
        .into_iter()
        .map(|p| {
            let predicted = p.result.predicted_power.ok_or_else(|| {
                invalid(format!(
                    "no asymptotic power available at {} = {}",
                    sweep.parameter.as_str(),
                    p.grid_value
                ))
            })?;
            Ok(GapRow {
                grid_value: p.grid_value,
                empirical: p.result.rejection_rate,
                predicted,
                gap: p.result.rejection_rate - predicted,
                mc_standard_error: p.result.mc_standard_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_gap = rows.iter().map(|r| r.gap.abs()).fold(0.0, f64::max);
    Ok(AsymptoticComparison { rows, max_abs_gap })
}

/// Data of replication `rep`, drawn from the `(master_seed, rep)` stream.
/// The regression process yields the columns `x, y`.
pub fn replication_sample(spec: &ScenarioSpec, rep: u64) -> Result<Sample> {
    let mut rng = replication_rng(spec.master_seed, rep);
    let (n, t) = (spec.n, spec.t);
    match spec.dgp {
        Dgp::IidGaussian { mu1, mu2, sd1, sd2 } => {
            gen_iid_gaussian(n, t, mu1, mu2, sd1, sd2, &mut rng)
        }
        Dgp::Ar1MeanShift {
            rho,
            delta,
            burn_in,
        } => gen_ar1(n, rho, delta, t, burn_in, &mut rng),
        Dgp::Chi2Switch { df } => gen_chi2_standardized(n, t, df, &mut rng),
        Dgp::RegressionSlope {
            beta1,
            beta2,
            regressor,
            noise_sd,
        } => {
            let (x, y) = gen_regression(n, t, beta1, beta2, regressor, noise_sd, &mut rng)?;
            Sample::from_columns(&[&x, &y])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_spec(mu2: f64, reps: usize) -> ScenarioSpec {
        ScenarioSpec {
            dgp: Dgp::IidGaussian {
                mu1: 0.0,
                mu2,
                sd1: 1.0,
                sd2: 1.0,
            },
            n: 100,
            t: 0.5,
            test: TestKind::Mean,
            config: RelevanceConfig::new(1.0, 0.05).unwrap(),
            reps,
            master_seed: 42,
        }
    }

    #[test]
    fn result_independent_of_worker_count() {
        let spec = mean_spec(1.2, 300);
        let one = run_scenario(&spec, Some(1)).unwrap();
        let four = run_scenario(&spec, Some(4)).unwrap();
        let global = run_scenario(&spec, None).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, global);
        assert_eq!(one.reps_completed, 300);
        let se = (one.rejection_rate * (1.0 - one.rejection_rate) / 300.0).sqrt();
        assert_eq!(one.mc_standard_error, se);
    }

    #[test]
    fn replications_do_not_collide() {
        let spec = mean_spec(1.0, 1);
        let mut firsts: Vec<Vec<u64>> = (0..2000)
            .map(|rep| {
                let s = replication_sample(&spec, rep).unwrap();
                s.column(0).iter().take(10).map(|v| v.to_bits()).collect()
            })
            .collect();
        firsts.sort();
        firsts.dedup();
        assert_eq!(firsts.len(), 2000);
    }

    #[test]
    fn single_rep_smoke() {
        let r = run_scenario(&mean_spec(3.0, 1), Some(2)).unwrap();
        assert!(r.rejection_rate == 0.0 || r.rejection_rate == 1.0);
        assert_eq!(r.reps_completed, 1);
    }

    #[test]
    fn validation() {
        let mut spec = mean_spec(1.0, 0);
        assert!(spec.validate().is_err());
        spec.reps = 10;
        spec.t = 0.01;
        assert!(spec.validate().is_err());
        spec.t = 0.5;
        spec.test = TestKind::Regression;
        assert!(spec.validate().is_err());
        spec.test = TestKind::CorrelationStat;
        assert!(spec.validate().is_err());
        spec.test = TestKind::Mean;
        spec.dgp = Dgp::Ar1MeanShift {
            rho: 1.0,
            delta: 1.0,
            burn_in: 10,
        };
        assert!(spec.validate().is_err());
        assert!(SweepParameter::Df.apply(&mean_spec(1.0, 5), 1.0).is_err());
        assert!(SweepParameter::N.apply(&mean_spec(1.0, 5), 10.5).is_err());
    }

    #[test]
    fn predicted_power_at_boundary_is_alpha() {
        let spec = mean_spec(1.0, 10);
        let (dist, tau2) = spec.true_parameters().unwrap();
        assert_eq!(dist, 1.0);
        assert!((tau2 - 19.2).abs() < 1e-12);
        assert!((spec.predicted_power().unwrap() - 0.05).abs() < 1e-12);
        let inside = mean_spec(0.0, 10);
        assert!(inside.predicted_power().is_none());
    }

    #[test]
    fn chi2_switch_distances() {
        // quadrature reference values of ||Phi - G_f||, G_f the standardized chi-square law
        let reference = [
            (0.2, 0.373_011_504_1),
            (0.4, 0.315_469_363_8),
            (0.6, 0.276_348_113_1),
            (0.8, 0.247_578_022_9),
            (1.0, 0.225_394_586_4),
            (1.2, 0.207_708_469_9),
            (1.4, 0.193_244_482_3),
        ];
        let published = [0.3730, 0.3154, 0.2764, 0.2476, 0.2254, 0.2077, 0.1932];
        for ((df, want), shown) in reference.iter().zip(published) {
            let spec = ScenarioSpec {
                dgp: Dgp::Chi2Switch { df: *df },
                test: TestKind::Distribution,
                ..mean_spec(0.0, 1)
            };
            let (dist, tau2) = spec.true_parameters().unwrap();
            assert!((dist - want).abs() < 1e-6, "df {df}: {dist}");
            assert!((dist - shown).abs() < 1e-4, "df {df}: {dist}");
            assert!(tau2 > 0.0);
        }
    }

    #[test]
    fn regression_true_variance() {
        let spec = ScenarioSpec {
            dgp: Dgp::RegressionSlope {
                beta1: 0.0,
                beta2: 1.0,
                regressor: RegressorLaw::Normal,
                noise_sd: 1.0,
            },
            test: TestKind::Regression,
            ..mean_spec(0.0, 1)
        };
        let (dist, tau2) = spec.true_parameters().unwrap();
        assert_eq!(dist, 1.0);
        // 19.2 delta^2 + 11.2 delta^4 at delta = 1 for unit-variance normal data
        assert!((tau2 - 30.4).abs() < 1e-10, "{tau2}");
    }

    #[test]
    fn sweep_applies_parameters() {
        let base = mean_spec(1.0, 5);
        let s = SweepParameter::Shift.apply(&base, -0.5).unwrap();
        assert!(matches!(s.dgp, Dgp::IidGaussian { mu2, .. } if mu2 == -0.5));
        let s = SweepParameter::Threshold.apply(&base, 0.4).unwrap();
        assert_eq!(s.config.delta, 0.4);
        let s = SweepParameter::Sd.apply(&base, 2.0).unwrap();
        assert!(matches!(s.dgp, Dgp::IidGaussian { sd1, sd2, .. } if sd1 == 2.0 && sd2 == 2.0));
        let curve = power_curve(
            &base,
            &Sweep {
                parameter: SweepParameter::N,
                values: vec![50.0, 80.0],
            },
            Some(2),
        )
        .unwrap();
        assert_eq!(curve.len(), 2);
        assert!(power_curve(
            &base,
            &Sweep {
                parameter: SweepParameter::N,
                values: vec![]
            },
            None
        )
        .is_err());
    }
}
