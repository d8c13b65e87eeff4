//! Monte Carlo ABER sweeps.
//!
//! A trial draws user positions, channels, bits and noise from its own
//! counter-based random streams, then detects the same realization at every
//! power point of the sweep. Trials run in parallel and are reduced in trial
//! order, so a report depends only on the configuration and the seed.

mod config;
mod report;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub use config::{ActiveUsers, BoundConfig, PathlossMode, SimulationConfig};
pub use report::{AberReport, AberRow};

use crate::analysis::{aber_union_bound, branch_mean_pathloss, mean_pathloss, BoundSetup};
use crate::channel::{
    apply_time_domain, build_dd_matrix, dbm_to_watts, generate_channel, nearest_index, noise_power_watts, perturb_csi,
    MultipathChannel, Point, Scheme, UserGeometry,
};
use crate::codebook::{allocate, codewords_per_frame, map_bits, ScmaCodebook};
use crate::detectors::{
    gaep_centralized, gaep_decentralized, ml_detect_single_user, reduce_system, Algorithm, ReducedSystem,
};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::modem::{demodulate, modulate, TimeDomainSignal};
use crate::rng::{stream, sub};

/// Noise power in watts for a PSD in dBm/Hz over `bandwidth_hz`.
pub fn noise_variance(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    noise_power_watts(psd_dbm_hz, bandwidth_hz)
}

/// Draws `count` users uniformly over the lanes.
pub fn sample_geometry<R: Rng + ?Sized>(cfg: &SimulationConfig, count: usize, rng: &mut R) -> Vec<UserGeometry> {
    (0..count)
        .map(|_| UserGeometry { position: cfg.layout.sample_position(rng), velocity_kmh: cfg.velocity_kmh })
        .collect()
}

/// Receiver units whose decisions count for a user at `p`.
pub fn serving_receivers(scheme: Scheme, receivers: &[Point], p: &Point) -> Vec<usize> {
    match scheme {
        Scheme::Comp | Scheme::Colocated => (0..receivers.len()).collect(),
        Scheme::Cellular => vec![nearest_index(p, receivers)],
    }
}

/// Quantities shared by every trial of a sweep.
#[derive(Debug, Clone)]
pub struct SimContext {
    pub cfg: SimulationConfig,
    pub codebook: ScmaCodebook,
    pub noise_var: f64,
    pub receivers: Vec<Point>,
    /// Mean pathloss in dB per receiver, for serving and non-serving users.
    mean_pathloss_db: Option<Vec<(f64, f64)>>,
    pub codewords_per_user: usize,
}

impl SimContext {
    pub fn new(cfg: &SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let codebook = cfg.load_codebook()?;
        let codewords_per_user = codewords_per_frame(&cfg.grid, codebook.num_resources(), cfg.allocation)?;
        let receivers = cfg.scheme.receiver_sites(&cfg.layout);
        let mean_pathloss_db = match cfg.pathloss_mode {
            PathlossMode::Geometry => None,
            PathlossMode::Mean => Some(receiver_mean_pathloss(cfg, &receivers)?),
        };
        Ok(SimContext {
            cfg: cfg.clone(),
            codebook,
            noise_var: noise_variance(cfg.noise_psd_dbm_hz, cfg.grid.bandwidth()),
            receivers,
            mean_pathloss_db,
            codewords_per_user,
        })
    }

    /// Information bits per transmitting user and frame.
    pub fn bits_per_user(&self) -> usize {
        self.codewords_per_user * self.codebook.bits_per_codeword()
    }

    pub fn active_users(&self) -> usize {
        match self.cfg.active_users {
            ActiveUsers::All => self.codebook.num_users(),
            ActiveUsers::Single => 1,
        }
    }

    /// Series label of the simulated curve.
    pub fn series_name(&self) -> String {
        let base = match self.cfg.detector.algorithm {
            Algorithm::Centralized => "centralized",
            Algorithm::Decentralized => "decentralized",
            Algorithm::Ml => "ml",
        };
        match self.cfg.active_users {
            ActiveUsers::All => base.to_string(),
            ActiveUsers::Single => format!("{base}_single_user"),
        }
    }
}

fn to_db(gain: f64) -> f64 {
    -10.0 * gain.log10()
}

fn receiver_mean_pathloss(cfg: &SimulationConfig, receivers: &[Point]) -> Result<Vec<(f64, f64)>> {
    let samples = cfg.bound.pathloss_samples;
    let branch = branch_mean_pathloss(cfg.scheme, &cfg.layout, samples, cfg.seed)?;
    match cfg.scheme {
        Scheme::Comp | Scheme::Colocated => Ok(branch.iter().map(|&g| (to_db(g), to_db(g))).collect()),
        Scheme::Cellular => {
            let mut rng = stream(cfg.seed, receivers.len() as u64, sub::PATHLOSS);
            let farther = mean_pathloss(samples, &mut rng, |r| {
                let p = cfg.layout.sample_position(r);
                let near = nearest_index(&p, receivers);
                receivers[1 - near].distance(&p)
            })?;
            Ok(receivers.iter().map(|_| (to_db(branch[0]), to_db(farther))).collect())
        }
    }
}

/// Everything drawn for one trial, independent of transmit power.
#[derive(Debug, Clone)]
pub struct Realization {
    /// Codebook user index of each transmitting user.
    pub users: Vec<usize>,
    pub positions: Vec<Point>,
    pub bits: Vec<Vec<u8>>,
    /// `signal[u][j]`: delay-Doppler observation of user `j` at receiver `u`
    /// for unit transmit power.
    pub signal: Vec<Vec<Vec<Complex64>>>,
    /// Delay-Doppler noise at each receiver.
    pub noise: Vec<Vec<Complex64>>,
    /// Grouped systems built from the receiver's CSI, for unit power.
    pub systems: Vec<ReducedSystem>,
    /// Receivers whose decisions count for each user.
    pub serving: Vec<Vec<usize>>,
}

fn complex_noise<R: Rng + ?Sized>(n: usize, var: f64, rng: &mut R) -> Vec<Complex64> {
    let s = (var / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// Draws the realization of trial `trial`.
pub fn realize(ctx: &SimContext, trial: u64) -> Result<Realization> {
    let cfg = &ctx.cfg;
    let seed = cfg.seed;
    let grid = &cfg.grid;
    let mn = grid.len();
    let users: Vec<usize> = match cfg.active_users {
        ActiveUsers::All => (0..ctx.codebook.num_users()).collect(),
        ActiveUsers::Single => vec![(trial % ctx.codebook.num_users() as u64) as usize],
    };
    let cb = match cfg.active_users {
        ActiveUsers::All => ctx.codebook.clone(),
        ActiveUsers::Single => ctx.codebook.subset(&users)?,
    };

    let mut geo_rng = stream(seed, trial, sub::GEOMETRY);
    let geometry = sample_geometry(cfg, users.len(), &mut geo_rng);
    let mut bit_rng = stream(seed, trial, sub::BITS);
    let bits: Vec<Vec<u8>> =
        users.iter().map(|_| (0..ctx.bits_per_user()).map(|_| bit_rng.random_range(0..2u8)).collect()).collect();
    let frames: Vec<TimeDomainSignal> = bits
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let idx = map_bits(b, &cb, j)?;
            modulate(&allocate(&idx, &cb, grid, cfg.allocation, j)?, grid)
        })
        .collect::<Result<_>>()?;

    let mut ch_rng = stream(seed, trial, sub::CHANNEL);
    let mut csi_rng = stream(seed, trial, sub::CSI);
    let mut noise_rng = stream(seed, trial, sub::NOISE);
    let serving: Vec<Vec<usize>> =
        geometry.iter().map(|g| serving_receivers(cfg.scheme, &ctx.receivers, &g.position)).collect();
    let mut signal = Vec::with_capacity(ctx.receivers.len());
    let mut noise = Vec::with_capacity(ctx.receivers.len());
    let mut systems = Vec::with_capacity(ctx.receivers.len());
    for (u, site) in ctx.receivers.iter().enumerate() {
        let mut per_user = Vec::with_capacity(users.len());
        let mut matrices = Vec::with_capacity(users.len());
        let mut paths = 0;
        for (j, g) in geometry.iter().enumerate() {
            let mut ch: MultipathChannel = generate_channel(g, site, &cfg.profile, grid, cfg.carrier_hz, &mut ch_rng)?;
            if let Some(means) = &ctx.mean_pathloss_db {
                let (serving_db, other_db) = means[u];
                ch.pathloss_db = if serving[j].contains(&u) { serving_db } else { other_db };
            }
            let received = apply_time_domain(&frames[j], &ch, grid)?;
            per_user.push(demodulate(&received, grid)?.as_slice().to_vec());
            let estimate =
                if cfg.csi_epsilon > 0.0 { perturb_csi(&ch, cfg.csi_epsilon, grid, &mut csi_rng) } else { ch };
            paths += estimate.paths.len();
            matrices.push(build_dd_matrix(&estimate, grid));
        }
        let w = TimeDomainSignal::from_payload(complex_noise(mn, ctx.noise_var, &mut noise_rng));
        let w = demodulate(&w, grid)?;
        let zeros = vec![Complex64::new(0.0, 0.0); mn];
        systems.push(reduce_system(&zeros, &matrices, &vec![1.0; users.len()], 1.0, &cb, grid, cfg.allocation, paths)?);
        signal.push(per_user);
        noise.push(w.as_slice().to_vec());
    }
    Ok(Realization {
        users,
        positions: geometry.iter().map(|g| g.position).collect(),
        bits,
        signal,
        noise,
        systems,
        serving,
    })
}

/// Bit errors and bits sent for one trial at one power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    pub bit_errors: u64,
    pub bits: u64,
}

/// Detects a realization at `power_dbm` per user.
///
/// The model `y = √P·H·x + w` is detected in the equivalent normalized form
/// `y/√P = H·x + w/√P`.
pub fn evaluate(ctx: &SimContext, real: &Realization, power_dbm: f64) -> Result<TrialOutcome> {
    let cfg = &ctx.cfg;
    let amp = dbm_to_watts(power_dbm).sqrt();
    let cb = match cfg.active_users {
        ActiveUsers::All => ctx.codebook.clone(),
        ActiveUsers::Single => ctx.codebook.subset(&real.users)?,
    };
    let systems: Vec<ReducedSystem> = real
        .systems
        .iter()
        .enumerate()
        .map(|(u, base)| {
            let mut sys = base.clone();
            for (i, y) in sys.y.iter_mut().enumerate() {
                *y = real.signal[u].iter().map(|s| s[i]).sum::<Complex64>() + real.noise[u][i] / amp;
            }
            sys.noise_var = ctx.noise_var / (amp * amp);
            sys
        })
        .collect();

    let detect = |sys: &ReducedSystem, algorithm: Algorithm| -> Result<Vec<Vec<u8>>> {
        match algorithm {
            Algorithm::Ml => Ok(ml_detect_single_user(sys, &cb)?.bits),
            _ => Ok(gaep_centralized(sys, &cb, &cfg.detector)?.bits),
        }
    };
    let decoded: Vec<Vec<Vec<u8>>> = match cfg.scheme {
        Scheme::Comp | Scheme::Colocated => {
            let bits = match cfg.detector.algorithm {
                Algorithm::Decentralized => {
                    gaep_decentralized([&systems[0], &systems[1]], &cb, &cfg.detector, cfg.execution)?.per_rrh[0]
                        .bits
                        .clone()
                }
                alg => detect(&ReducedSystem::stack(&systems.iter().collect::<Vec<_>>())?, alg)?,
            };
            vec![bits]
        }
        Scheme::Cellular => {
            let needed: Vec<bool> = (0..systems.len()).map(|u| real.serving.iter().any(|s| s.contains(&u))).collect();
            systems
                .iter()
                .zip(&needed)
                .map(|(sys, &need)| if need { detect(sys, cfg.detector.algorithm) } else { Ok(Vec::new()) })
                .collect::<Result<_>>()?
        }
    };
    let mut out = TrialOutcome::default();
    for (j, truth) in real.bits.iter().enumerate() {
        let unit = match cfg.scheme {
            Scheme::Cellular => real.serving[j][0],
            _ => 0,
        };
        let got = &decoded[unit][j];
        out.bit_errors += truth.iter().zip(got).filter(|(a, b)| a != b).count() as u64;
        out.bits += truth.len() as u64;
    }
    Ok(out)
}

/// Runs trial `trial` at a single power point.
pub fn run_trial(ctx: &SimContext, trial: u64, power_dbm: f64) -> Result<TrialOutcome> {
    evaluate(ctx, &realize(ctx, trial)?, power_dbm)
}

/// Runs the configured sweep.
pub fn run_sweep(cfg: &SimulationConfig) -> Result<AberReport> {
    let ctx = SimContext::new(cfg)?;
    let powers = &cfg.powers_dbm;
    let per_trial = map_indexed(cfg.execution, cfg.trials, |t| -> Result<Vec<TrialOutcome>> {
        let wrap = |e| Error::Trial { trial: t as u64, source: Box::new(e) };
        let real = realize(&ctx, t as u64).map_err(wrap)?;
        powers.iter().map(|&p| evaluate(&ctx, &real, p).map_err(wrap)).collect()
    });
    let mut totals = vec![TrialOutcome::default(); powers.len()];
    for outcome in per_trial {
        for (acc, o) in totals.iter_mut().zip(outcome?) {
            acc.bit_errors += o.bit_errors;
            acc.bits += o.bits;
        }
    }
    let expected = cfg.trials as u64 * ctx.active_users() as u64 * ctx.bits_per_user() as u64;
    if totals.iter().any(|t| t.bits != expected) {
        return Err(Error::Internal("bit count does not match the closed form".into()));
    }
    let series = ctx.series_name();
    Ok(AberReport {
        rows: powers
            .iter()
            .zip(&totals)
            .map(|(&p, t)| AberRow {
                scheme: cfg.scheme.name().to_string(),
                power_dbm: p,
                series: series.clone(),
                aber: t.bit_errors as f64 / t.bits as f64,
                bit_errors: t.bit_errors,
                bits_total: t.bits,
                trials: cfg.trials as u64,
                seed: cfg.seed,
            })
            .collect(),
    })
}

/// Bound inputs derived from a simulation config.
pub fn bound_setup(cfg: &SimulationConfig) -> Result<BoundSetup> {
    cfg.validate()?;
    Ok(BoundSetup {
        grid: cfg.grid,
        codebook: cfg.load_codebook()?,
        allocation: cfg.allocation,
        scheme: cfg.scheme,
        layout: cfg.layout,
        profile: cfg.profile.clone(),
        velocity_kmh: cfg.velocity_kmh,
        carrier_hz: cfg.carrier_hz,
        noise_var: noise_variance(cfg.noise_psd_dbm_hz, cfg.grid.bandwidth()),
        channel_draws: cfg.bound.channel_draws,
        pathloss_samples: cfg.bound.pathloss_samples,
        gain_convention: cfg.bound.gain_convention,
    })
}

/// ABER union bound over the configured sweep, as `series = bound` rows.
pub fn run_bound(cfg: &SimulationConfig) -> Result<AberReport> {
    let setup = bound_setup(cfg)?;
    let aber = aber_union_bound(&setup, &cfg.powers_dbm, cfg.seed, cfg.execution)?;
    Ok(AberReport {
        rows: cfg
            .powers_dbm
            .iter()
            .zip(aber)
            .map(|(&p, a)| AberRow {
                scheme: cfg.scheme.name().to_string(),
                power_dbm: p,
                series: "bound".to_string(),
                aber: a,
                bit_errors: 0,
                bits_total: 0,
                trials: cfg.bound.channel_draws as u64,
                seed: cfg.seed,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelProfile, ProfileMode};
    use crate::detectors::DetectorConfig;
    use crate::exec::Execution;
    use crate::modem::OtfsGrid;

    fn small(scheme: Scheme, algorithm: Algorithm) -> SimulationConfig {
        SimulationConfig {
            grid: OtfsGrid::new(8, 4, 15e3, 12).unwrap(),
            scheme,
            profile: ChannelProfile { tap_spacing: 1.0, ..Default::default() },
            powers_dbm: vec![0.0, 20.0],
            detector: DetectorConfig { algorithm, ..Default::default() },
            trials: 6,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn noise_examples() {
        let n = noise_variance(-174.0, 960e3);
        assert!((10.0 * (n * 1e3).log10() + 114.18).abs() < 5e-3);
        assert!((noise_variance(-174.0, 1.0) - dbm_to_watts(-174.0)).abs() < 1e-30);
        let ratio = noise_variance(-174.0, 2e6) / noise_variance(-174.0, 1e6);
        assert!((10.0 * ratio.log10() - 3.0103).abs() < 1e-4);
    }

    #[test]
    fn geometry_and_serving_sets() {
        let cfg = small(Scheme::Comp, Algorithm::Centralized);
        let mid = Point::new(500.0, 150.0);
        assert!((mid.distance(&cfg.layout.behind_rrh()) - 522.0153).abs() < 1e-4);
        assert!((mid.distance(&cfg.layout.ahead_rrh()) - 522.0153).abs() < 1e-4);
        let receivers = Scheme::Cellular.receiver_sites(&cfg.layout);
        for x in [10.0, 499.0, 501.0, 990.0] {
            assert_eq!(serving_receivers(Scheme::Cellular, &receivers, &Point::new(x, 160.0)).len(), 1);
        }
        let mut rng = stream(1, 0, sub::GEOMETRY);
        for g in sample_geometry(&cfg, 50, &mut rng) {
            assert!(cfg.layout.contains(&g));
        }
    }

    #[test]
    fn noiseless_single_user_has_no_errors() {
        for algorithm in [Algorithm::Centralized, Algorithm::Ml] {
            let mut cfg = small(Scheme::Comp, algorithm);
            cfg.grid = OtfsGrid::new(4, 2, 15e3, 8).unwrap();
            cfg.profile = ChannelProfile { num_paths: 1, mode: ProfileMode::Uniform, ..Default::default() };
            cfg.noise_psd_dbm_hz = -400.0;
            cfg.active_users = ActiveUsers::Single;
            let report = run_sweep(&cfg).unwrap();
            assert!(report.rows.iter().all(|r| r.bit_errors == 0), "{report:?}");
        }
    }

    #[test]
    fn bit_accounting_and_schemes() {
        for scheme in [Scheme::Comp, Scheme::Colocated, Scheme::Cellular] {
            let report = run_sweep(&small(scheme, Algorithm::Centralized)).unwrap();
            for row in &report.rows {
                assert_eq!(row.bits_total, 6 * 6 * 8 * 2);
                assert_eq!(row.aber, row.bit_errors as f64 / row.bits_total as f64);
                assert_eq!(row.scheme, scheme.name());
            }
        }
    }

    #[test]
    fn deterministic_across_execution_modes() {
        let mut cfg = small(Scheme::Comp, Algorithm::Decentralized);
        cfg.csi_epsilon = 0.05;
        let a = run_sweep(&cfg).unwrap();
        cfg.execution = Execution::Sequential;
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    }

    #[test]
    fn zero_csi_error_replays_perfect_csi() {
        let cfg = small(Scheme::Comp, Algorithm::Centralized);
        let ctx = SimContext::new(&cfg).unwrap();
        let perfect = realize(&ctx, 2).unwrap();
        let mut eps0 = cfg.clone();
        eps0.csi_epsilon = 0.0;
        let again = realize(&SimContext::new(&eps0).unwrap(), 2).unwrap();
        assert_eq!(perfect.systems, again.systems);
        // A non-zero error changes only the CSI, not the observations.
        let mut noisy = cfg.clone();
        noisy.csi_epsilon = 0.1;
        let est = realize(&SimContext::new(&noisy).unwrap(), 2).unwrap();
        assert_eq!(perfect.signal, est.signal);
        assert_eq!(perfect.noise, est.noise);
        assert_ne!(perfect.systems, est.systems);
    }

    #[test]
    fn mean_pathloss_mode_is_symmetric_for_comp() {
        let mut cfg = small(Scheme::Comp, Algorithm::Centralized);
        cfg.pathloss_mode = PathlossMode::Mean;
        cfg.bound.pathloss_samples = 50_000;
        let ctx = SimContext::new(&cfg).unwrap();
        let pl = ctx.mean_pathloss_db.clone().unwrap();
        assert!((pl[0].0 - pl[1].0).abs() < 0.1, "{pl:?}");
    }

    #[test]
    fn bound_rows() {
        let mut cfg = small(Scheme::Comp, Algorithm::Ml);
        cfg.grid = OtfsGrid::new(4, 2, 15e3, 8).unwrap();
        cfg.bound = BoundConfig { channel_draws: 2, pathloss_samples: 1000, ..Default::default() };
        let report = run_bound(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.series == "bound" && r.aber > 0.0 && r.aber < 0.5));
    }
}
