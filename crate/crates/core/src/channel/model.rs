use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::geometry::{pathloss_db, Point, UserGeometry};
use super::pulse::rc_pulse;
use crate::error::{invalid, Result};
use crate::modem::OtfsGrid;

/// Raised-cosine taps below this magnitude are treated as zero.
pub const PULSE_THRESHOLD: f64 = 1e-3;

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    /// Delay in seconds.
    pub delay: f64,
    /// Doppler shift in Hz.
    pub doppler: f64,
    /// Nearest integer of `doppler · N·T`.
    pub doppler_index: i64,
    /// `doppler · N·T − doppler_index`, in (−0.5, 0.5].
    pub doppler_frac: f64,
}

impl Path {
    pub fn new(gain: Complex64, delay: f64, doppler: f64, grid: &OtfsGrid) -> Self {
        let (doppler_index, doppler_frac) = split_doppler(doppler, grid.frame_time());
        Path { gain, delay, doppler, doppler_index, doppler_frac }
    }
}

/// Splits a Doppler shift into integer and fractional grid bins.
pub fn split_doppler(doppler: f64, frame_time: f64) -> (i64, f64) {
    let normalized = doppler * frame_time;
    let index = (normalized - 0.5).ceil();
    (index as i64, normalized - index)
}

/// Channel between one user and one RRH.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathChannel {
    pub paths: Vec<Path>,
    /// Timing offset in seconds.
    pub timing_offset: f64,
    /// Number of taps P of the sampled impulse response.
    pub num_taps: usize,
    pub pathloss_db: f64,
    pub rolloff: f64,
}

impl MultipathChannel {
    /// Amplitude factor `√PL` applied to the signal.
    pub fn amplitude(&self) -> f64 {
        10f64.powf(-self.pathloss_db / 20.0)
    }

    /// Raised-cosine weight of path `i` at tap `p`, zeroed below [`PULSE_THRESHOLD`].
    pub fn tap_weight(&self, i: usize, p: usize, ts: f64) -> f64 {
        let w = rc_pulse(p as f64 * ts - self.timing_offset - self.paths[i].delay, self.rolloff, ts);
        if w.abs() < PULSE_THRESHOLD {
            0.0
        } else {
            w
        }
    }

    /// `weights[i][p]` for every path and tap.
    pub fn tap_weights(&self, ts: f64) -> Vec<Vec<f64>> {
        (0..self.paths.len()).map(|i| (0..self.num_taps).map(|p| self.tap_weight(i, p, ts)).collect()).collect()
    }

    /// Largest tap index with a non-zero weight on any path.
    pub fn max_active_tap(&self, ts: f64) -> Option<usize> {
        (0..self.num_taps).rev().find(|&p| (0..self.paths.len()).any(|i| self.tap_weight(i, p, ts) != 0.0))
    }

    /// Single-tap flat channel `h`, no Doppler, no pathloss.
    pub fn flat(gain: Complex64) -> Self {
        MultipathChannel {
            paths: vec![Path { gain, delay: 0.0, doppler: 0.0, doppler_index: 0, doppler_frac: 0.0 }],
            timing_offset: 0.0,
            num_taps: 1,
            pathloss_db: 0.0,
            rolloff: 0.4,
        }
    }

    pub fn gains(&self) -> Vec<Complex64> {
        self.paths.iter().map(|p| p.gain).collect()
    }
}

/// How per-path powers are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileMode {
    /// Equal power 1/L on every path, matching the i.i.d. gain model of the bound.
    Uniform,
    /// Exponentially decaying power-delay profile.
    #[default]
    Exponential,
}

/// Power-delay profile and pulse parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelProfile {
    pub num_paths: usize,
    /// Explicit path delays in seconds; defaults to multiples of `tap_spacing` samples.
    pub delays: Option<Vec<f64>>,
    /// Explicit relative path powers; normalized to unit sum.
    pub powers: Option<Vec<f64>>,
    /// Spacing of the default delays, in samples.
    pub tap_spacing: f64,
    /// Exponential decay per path index of the default powers.
    pub decay: f64,
    pub rolloff: f64,
    /// Extra taps kept past the last path delay.
    pub pulse_span: usize,
    /// Timing offsets are drawn uniformly from `[0, timing_offset_max]` seconds.
    pub timing_offset_max: f64,
    pub mode: ProfileMode,
}

impl Default for ChannelProfile {
    fn default() -> Self {
        ChannelProfile {
            num_paths: 4,
            delays: None,
            powers: None,
            tap_spacing: 2.0,
            decay: 1.0,
            rolloff: 0.4,
            pulse_span: 4,
            timing_offset_max: 0.0,
            mode: ProfileMode::Exponential,
        }
    }
}

impl ChannelProfile {
    pub fn validate(&self) -> Result<()> {
        if self.num_paths == 0 {
            return Err(invalid("profile needs at least one path"));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(invalid(format!("rolloff {} outside (0, 1]", self.rolloff)));
        }
        if !(self.timing_offset_max >= 0.0) || !(self.tap_spacing >= 0.0) {
            return Err(invalid("timing offset and tap spacing must be non-negative"));
        }
        for (name, list) in [("delays", &self.delays), ("powers", &self.powers)] {
            if let Some(v) = list {
                if v.len() < self.num_paths {
                    return Err(invalid(format!("profile {name} has {} entries, need {}", v.len(), self.num_paths)));
                }
                if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(invalid(format!("profile {name} must be finite and non-negative")));
                }
            }
        }
        Ok(())
    }

    /// Path delays (seconds) and unit-sum powers.
    pub fn resolve(&self, grid: &OtfsGrid) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let l = self.num_paths;
        let ts = grid.sample_time();
        let delays = match &self.delays {
            Some(d) => d[..l].to_vec(),
            None => (0..l).map(|i| i as f64 * self.tap_spacing * ts).collect(),
        };
        let raw: Vec<f64> = match (self.mode, &self.powers) {
            (ProfileMode::Uniform, _) => vec![1.0; l],
            (ProfileMode::Exponential, Some(p)) => p[..l].to_vec(),
            (ProfileMode::Exponential, None) => (0..l).map(|i| (-self.decay * i as f64).exp()).collect(),
        };
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("profile powers sum to zero"));
        }
        Ok((delays, raw.iter().map(|p| p / total).collect()))
    }
}

/// Draws a Jakes Doppler shift: `ν = v_max·cos ρ` with ρ uniform on
/// `[0, π/2]` when approaching the receiver and `[π/2, π]` otherwise.
pub fn jakes_doppler<R: Rng + ?Sized>(v_max: f64, toward: bool, frame_time: f64, rng: &mut R) -> (f64, i64, f64) {
    let u: f64 = rng.random();
    let rho = if toward { u * FRAC_PI_2 } else { FRAC_PI_2 + u * FRAC_PI_2 };
    let mut nu = v_max * rho.cos();
    // cos(π/2) is not exactly zero in floating point; keep the sign contract.
    if toward {
        nu = nu.max(0.0);
    } else {
        nu = nu.min(0.0);
    }
    let (k, beta) = split_doppler(nu, frame_time);
    (nu, k, beta)
}

fn complex_gaussian<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Draws the channel between `user` and the RRH at `rrh`.
pub fn generate_channel<R: Rng + ?Sized>(
    user: &UserGeometry,
    rrh: &Point,
    profile: &ChannelProfile,
    grid: &OtfsGrid,
    carrier_hz: f64,
    rng: &mut R,
) -> Result<MultipathChannel> {
    let (delays, powers) = profile.resolve(grid)?;
    let distance_km = user.position.distance(rrh) / 1000.0;
    let pl = pathloss_db(distance_km)?;
    let v_max = super::geometry::max_doppler_hz(user.velocity_kmh, carrier_hz);
    let toward = user.moving_toward(rrh);
    let paths = delays
        .iter()
        .zip(&powers)
        .map(|(&delay, &power)| {
            let gain = complex_gaussian(power, rng);
            let (nu, _, _) = jakes_doppler(v_max, toward, grid.frame_time(), rng);
            Path::new(gain, delay, nu, grid)
        })
        .collect();
    let timing_offset =
        if profile.timing_offset_max > 0.0 { rng.random::<f64>() * profile.timing_offset_max } else { 0.0 };
    let ts = grid.sample_time();
    let tau_max = delays.iter().cloned().fold(0.0, f64::max);
    let num_taps = ((timing_offset + tau_max) / ts - 1e-9).ceil().max(0.0) as usize + profile.pulse_span;
    Ok(MultipathChannel { paths, timing_offset, num_taps: num_taps.max(1), pathloss_db: pl, rolloff: profile.rolloff })
}

/// Produces an imperfect estimate of `ch` under a norm-bounded error model.
///
/// Each true quantity equals the estimate plus an error of magnitude at most
/// `epsilon` times the true value: gain errors are uniform in a complex disk,
/// delay and Doppler errors uniform on an interval. Relative to the estimate
/// the bound is `epsilon / (1 − epsilon)`.
pub fn perturb_csi<R: Rng + ?Sized>(
    ch: &MultipathChannel,
    epsilon: f64,
    grid: &OtfsGrid,
    rng: &mut R,
) -> MultipathChannel {
    assert!(epsilon >= 0.0, "epsilon must be non-negative");
    let mut est = ch.clone();
    for path in est.paths.iter_mut() {
        let r = epsilon * path.gain.norm() * rng.random::<f64>().sqrt();
        let angle = 2.0 * PI * rng.random::<f64>();
        let dh = Complex64::from_polar(r, angle);
        let dtau = epsilon * path.delay.abs() * (2.0 * rng.random::<f64>() - 1.0);
        let dnu = epsilon * path.doppler.abs() * (2.0 * rng.random::<f64>() - 1.0);
        *path = Path::new(path.gain - dh, path.delay - dtau, path.doppler - dnu, grid);
    }
    est
}
