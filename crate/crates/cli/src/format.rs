//! Deterministic number formatting for CSV output.

/// `v` rounded to 10 significant digits, printed in the shortest form that
/// reproduces the rounded value. Very small or large magnitudes use
/// exponent notation.
pub fn sig10(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{v:.9e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

pub fn opt_sig10(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), sig10)
}
