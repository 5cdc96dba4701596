//! Locale-independent numeric formatting for CSV output.

/// Format with 12 significant digits, `.` decimal separator, no grouping.
///
/// Magnitudes in `[1e-4, 1e12)` use plain fixed notation with redundant
/// trailing zeros removed; anything smaller or larger uses scientific
/// notation so the digit count stays bounded.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs();
    if (1e-4..1e12).contains(&magnitude) {
        let decade = magnitude.log10().floor() as i32;
        let decimals = (11 - decade).max(0) as usize;
        trim_fraction(format!("{x:.decimals$}"))
    } else {
        format!("{x:.11e}")
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}
