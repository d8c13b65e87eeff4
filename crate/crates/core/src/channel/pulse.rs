use std::f64::consts::PI;

/// Raised-cosine pulse with symbol period `ts`, evaluated at `tau` seconds.
///
/// The removable singularity at `|tau| = ts / (2·rolloff)` is replaced by
/// its limit `(π/4)·sinc(1/(2·rolloff))`.
pub fn rc_pulse(tau: f64, rolloff: f64, ts: f64) -> f64 {
    debug_assert!(rolloff > 0.0 && rolloff <= 1.0);
    let x = tau / ts;
    let edge = 2.0 * rolloff * x;
    if (edge.abs() - 1.0).abs() < 1e-9 {
        return PI / 4.0 * sinc(1.0 / (2.0 * rolloff));
    }
    sinc(x) * (PI * rolloff * x).cos() / (1.0 - edge * edge)
}

/// Normalized sinc, `sin(πx)/(πx)`; exact zero at non-zero integers.
fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if x.fract() == 0.0 {
        return 0.0;
    }
    (PI * x).sin() / (PI * x)
}
