/// Rounds half away from zero at `places` decimals. Values within 1e-6 of a
/// half step (in units of the last place) are treated as exactly half, so
/// 0.00125 rounds to 0.0013 even though its binary value is slightly below.
pub fn round_display(x: f64, places: u32) -> f64 {
    let scale = 10f64.powi(places as i32);
    let scaled = ((x * scale) * 1e6).round() / 1e6;
    let r = scaled.round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Four-decimal metric cell, e.g. `0.5550`.
pub fn format_metric(x: f64) -> String {
    format!("{:.4}", round_display(x, 4))
}

/// Three-decimal signed delta in parentheses, e.g. `(+0.025)`; zero shows as `(+0.000)`.
pub fn format_delta(d: f64) -> String {
    let r = round_display(d, 3);
    if r < 0.0 {
        format!("({r:.3})")
    } else {
        format!("(+{r:.3})")
    }
}
