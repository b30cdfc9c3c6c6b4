use super::RelevanceConfig;
use crate::normal::{normal_quantile, normal_sf};

/// Decision rule `M^2 >= Delta^2 + u_{1-alpha} tau / sqrt(n)`.
///
/// Returns `(reject, critical_value)`. With `tau_hat = 0` this reduces to
/// `M^2 >= Delta^2`.
pub fn decide(m_hat_squared: f64, tau_hat: f64, config: &RelevanceConfig, n: usize) -> (bool, f64) {
    let u = normal_quantile(1.0 - config.alpha).expect("alpha validated in (0, 1)");
    let critical = config.delta * config.delta + u * tau_hat / (n as f64).sqrt();
    (m_hat_squared >= critical, critical)
}

/// p-value `1 - Phi(sqrt(n / tau^2) (M^2 - Delta^2))`.
///
/// Degenerate variance (`tau^2 <= 0`) gives 0 when `M^2 >= Delta^2` and 1
/// otherwise, so that `reject <=> p <= alpha` holds in that case too.
pub fn p_value(m_hat_squared: f64, tau_hat_squared: f64, delta: f64, n: usize) -> f64 {
    let excess = m_hat_squared - delta * delta;
    if !(tau_hat_squared > 0.0) {
        return if excess >= 0.0 { 0.0 } else { 1.0 };
    }
    normal_sf((n as f64 / tau_hat_squared).sqrt() * excess)
}

/// Approximate rejection probability `1 - Phi(sqrt(n)(Delta^2 - delta^2)/tau + u_{1-alpha})`
/// at true distance `delta_true`.
pub fn asymptotic_power(
    delta_true: f64,
    delta_threshold: f64,
    tau: f64,
    n: usize,
    alpha: f64,
) -> f64 {
    let u = normal_quantile(1.0 - alpha).expect("alpha in (0, 1)");
    let shift =
        (n as f64).sqrt() * (delta_threshold * delta_threshold - delta_true * delta_true) / tau;
    normal_sf(shift + u)
}
