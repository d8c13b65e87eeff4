use std::f64::consts::PI;

use num_complex::Complex64;

use super::model::MultipathChannel;
use crate::error::{Error, Result};
use crate::modem::{OtfsGrid, TimeDomainSignal};

/// Time-varying tap `g[c, p] = √PL · Σ_i h_i e^{j2πν_i(c−p)Ts} P_rc(pTs − t − τ_i)`.
pub fn tap_gain(ch: &MultipathChannel, weights: &[Vec<f64>], c: usize, p: usize, ts: f64) -> Complex64 {
    let dt = (c as f64 - p as f64) * ts;
    let sum: Complex64 = ch
        .paths
        .iter()
        .zip(weights)
        .filter(|(_, w)| w[p] != 0.0)
        .map(|(path, w)| path.gain * Complex64::from_polar(w[p], 2.0 * PI * path.doppler * dt))
        .sum();
    sum * ch.amplitude()
}

/// Passes a CP-prefixed frame through the channel and returns the
/// received payload (CP already discarded).
///
/// Sample `c` of the payload is `Σ_p g[c, p]·s_ext[cp + c − p]`, where
/// `s_ext` is the CP-extended transmission, so `s_ext[cp + c − p]` equals
/// `s[[c − p]_MN]` whenever the CP covers the channel memory.
pub fn apply_time_domain(s: &TimeDomainSignal, ch: &MultipathChannel, grid: &OtfsGrid) -> Result<TimeDomainSignal> {
    let mn = grid.len();
    if s.payload().len() != mn {
        return Err(crate::error::invalid("payload length does not match grid"));
    }
    let ts = grid.sample_time();
    let required = ch.num_taps.saturating_sub(1);
    if s.cp_len < required {
        return Err(Error::InterFrameInterference { cp_len: s.cp_len, required });
    }
    let weights = ch.tap_weights(ts);
    let active: Vec<usize> = (0..ch.num_taps).filter(|&p| weights.iter().any(|w| w[p] != 0.0)).collect();
    let out = (0..mn)
        .map(|c| active.iter().map(|&p| tap_gain(ch, &weights, c, p, ts) * s.samples[s.cp_len + c - p]).sum())
        .collect();
    Ok(TimeDomainSignal::from_payload(out))
}
