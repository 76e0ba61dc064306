//! CSV helpers shared by every writer in the crate.

/// Formats a number with 17 significant digits.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}
