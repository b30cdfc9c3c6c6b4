//! Data generating processes for the size and power studies.
//!
//! Every generator places the break after the first `floor(n t)` observations
//! and draws all randomness from the supplied generator, so a fixed seed
//! gives bit-identical samples.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sample::Sample;

/// Number of observations before the break.
pub fn break_index(n: usize, t: f64) -> usize {
    ((n as f64 * t).floor() as usize).min(n)
}

fn check_fraction(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid(format!(
            "break fraction must lie in [0, 1], got {t}"
        )));
    }
    Ok(())
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>> {
    if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
        return Err(invalid(format!(
            "invalid normal parameters: mean {mean}, sd {sd}"
        )));
    }
    Normal::new(mean, sd).map_err(|e| invalid(e.to_string()))
}

/// Independent normals, `N(mu1, sd1^2)` before the break and `N(mu2, sd2^2)`
/// after. A zero standard deviation yields the constant mean exactly.
pub fn gen_iid_gaussian<R: Rng + ?Sized>(
    n: usize,
    t: f64,
    mu1: f64,
    mu2: f64,
    sd1: f64,
    sd2: f64,
    rng: &mut R,
) -> Result<Sample> {
    check_fraction(t)?;
    let k = break_index(n, t);
    let (first, second) = (normal(mu1, sd1)?, normal(mu2, sd2)?);
    let values: Vec<f64> = (0..n)
        .map(|i| {
            if i < k {
                first.sample(rng)
            } else {
                second.sample(rng)
            }
        })
        .collect();
    Sample::from_slice(&values)
}

/// Gaussian AR(1) `x_i = rho x_{i-1} + eps_i` with `delta` added after the break.
///
/// The recursion starts from its stationary law and runs `burn_in` further
/// steps before recording.
pub fn gen_ar1<R: Rng + ?Sized>(
    n: usize,
    rho: f64,
    delta: f64,
    t: f64,
    burn_in: usize,
    rng: &mut R,
) -> Result<Sample> {
    check_fraction(t)?;
    if !(rho.abs() < 1.0) {
        return Err(invalid(format!(
            "AR coefficient must satisfy |rho| < 1, got {rho}"
        )));
    }
    if !delta.is_finite() {
        return Err(invalid("shift must be finite"));
    }
    let k = break_index(n, t);
    let innovation = |rng: &mut R| -> f64 { rng.sample(StandardNormal) };
    let mut x = innovation(rng) / (1.0 - rho * rho).sqrt();
    for _ in 0..burn_in {
        x = rho * x + innovation(rng);
    }
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        x = rho * x + innovation(rng);
        values.push(if i < k { x } else { x + delta });
    }
    Sample::from_slice(&values)
}

/// `N(0, 1)` before the break, `(chi2_f - f) / sqrt(2f)` after.
///
/// The chi-square variate is drawn as `Gamma(f/2, 2)`, valid for any `f > 0`.
pub fn gen_chi2_standardized<R: Rng + ?Sized>(
    n: usize,
    t: f64,
    df: f64,
    rng: &mut R,
) -> Result<Sample> {
    check_fraction(t)?;
    if !(df > 0.0 && df.is_finite()) {
        return Err(invalid(format!(
            "degrees of freedom must be positive, got {df}"
        )));
    }
    let k = break_index(n, t);
    let chi2 = Gamma::new(df / 2.0, 2.0).map_err(|e| invalid(e.to_string()))?;
    let scale = (2.0 * df).sqrt();
    let values: Vec<f64> = (0..n)
        .map(|i| {
            if i < k {
                rng.sample(StandardNormal)
            } else {
                (chi2.sample(rng) - df) / scale
            }
        })
        .collect();
    Sample::from_slice(&values)
}

/// Law of the regressor in [`gen_regression`]; both have unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorLaw {
    Normal,
    /// `sqrt(3/5) t_5`.
    ScaledT5,
}

impl RegressorLaw {
    /// Variance of `X^2`.
    pub fn fourth_moment_variance(self) -> f64 {
        match self {
            RegressorLaw::Normal => 2.0,
            // E t_5^4 = 25, so E X^4 = (3/5)^2 25 = 9
            RegressorLaw::ScaledT5 => 8.0,
        }
    }
}

/// `y_i = beta x_i + eps_i` with `beta = beta1` before the break and `beta2`
/// after; `eps ~ N(0, noise_sd^2)` independent of `x`.
#[allow(clippy::too_many_arguments)]
pub fn gen_regression<R: Rng + ?Sized>(
    n: usize,
    t: f64,
    beta1: f64,
    beta2: f64,
    law: RegressorLaw,
    noise_sd: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_fraction(t)?;
    if !(beta1.is_finite() && beta2.is_finite()) {
        return Err(invalid("slopes must be finite"));
    }
    let noise = normal(0.0, noise_sd)?;
    let t5 = StudentT::new(5.0).map_err(|e| invalid(e.to_string()))?;
    let t5_scale = (3.0_f64 / 5.0).sqrt();
    let k = break_index(n, t);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let xi = match law {
            RegressorLaw::Normal => rng.sample(StandardNormal),
            RegressorLaw::ScaledT5 => t5_scale * t5.sample(rng),
        };
        let beta = if i < k { beta1 } else { beta2 };
        x.push(xi);
        y.push(beta * xi + noise.sample(rng));
    }
    Ok((x, y))
}
