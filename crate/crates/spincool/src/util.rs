//! Small shared helpers.

/// Formats `x` with `sig` significant digits, trimming trailing zeros.
/// Values outside the plain-decimal range fall back to scientific notation.
/// Used for CSV output so identical runs produce identical bytes.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let exp10 = x.abs().log10().floor() as i64;
    if exp10 >= sig as i64 || exp10 < -4 {
        return format!("{:.*e}", sig - 1, x);
    }
    let decimals = (sig as i64 - 1 - exp10).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

/// Quotes a CSV field if it contains a delimiter or quote.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
