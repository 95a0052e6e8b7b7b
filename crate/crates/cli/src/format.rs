//! Fixed-precision number formatting shared by the JSON and CSV writers.

/// `x` rounded to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Text form of [`sig12`]: plain decimals for moderate magnitudes,
/// scientific notation otherwise.
pub fn number(x: f64) -> String {
    let r = sig12(x);
    if r == 0.0 {
        "0".into()
    } else if (1e-6..1e15).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

pub fn sig12_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| sig12(*x)).collect()
}
