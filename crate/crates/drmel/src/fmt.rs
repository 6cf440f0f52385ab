//! Number formatting for reports: fixed significant digits, plain notation
//! where readable and scientific elsewhere.

/// Format with `sig` significant digits, like printf's %g.
pub fn sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -4 || exp >= sig as i32 {
        format!("{:.*e}", sig.saturating_sub(1), x)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

/// Six significant digits, the report default.
pub fn sig6(x: f64) -> String {
    sig(x, 6)
}
