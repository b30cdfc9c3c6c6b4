//! Standard normal distribution function and quantile.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};

fn standard() -> Normal {
    Normal::standard()
}

/// `Phi(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(x)`, without cancellation for large `x`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Phi^{-1}(p)` for `p` in `(0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("quantile level {p} outside (0, 1)")));
    }
    // polish the initial approximation with Newton steps on the accurate CDF
    let mut x = standard().inverse_cdf(p);
    for _ in 0..2 {
        let density = normal_pdf(x);
        if !(density > 0.0) {
            break;
        }
        let err = if p < 0.5 {
            normal_cdf(x) - p
        } else {
            (1.0 - p) - normal_sf(x)
        };
        x -= err / density;
    }
    Ok(x)
}
