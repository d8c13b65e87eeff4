//! Single-user pairwise error probability and the ABER union bound.
//!
//! For a frame `X` of user `j`, the observations at both RRHs are written as
//! `y = √P·Φ(X)·h + w`, where column `i` of `Φ(X)` is the response of path
//! `i` (unit gain) to the frame and `h` stacks the path gains of both
//! branches. Averaging the Chernoff-type approximation of the pairwise error
//! probability over i.i.d. Gaussian `h` gives a closed form in the
//! eigenvalues of `(Φ(X) − Φ(X̂))ᴴ(Φ(X) − Φ(X̂))`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    dbm_to_watts, dd_gain, generate_channel, pathloss_gain, theta, ChannelProfile, HighwayLayout, MultipathChannel,
    Point, Scheme, UserGeometry,
};
use crate::codebook::{allocate, codewords_per_frame, demap, AllocationScheme, ScmaCodebook};
use crate::detectors::MAX_HYPOTHESES;
use crate::error::{invalid, Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::modem::OtfsGrid;
use crate::rng::{stream, sub};

/// Relative threshold below which eigenvalues count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// `Φ(X)` of one branch: `MN × L`, row `k·M + ℓ`, one column per path,
/// without path gains or pathloss.
pub fn build_codeword_matrix(x: &DMatrix<Complex64>, ch: &MultipathChannel, grid: &OtfsGrid) -> DMatrix<Complex64> {
    let (m, n) = (grid.m, grid.n);
    let ts = grid.sample_time();
    let weights = ch.tap_weights(ts);
    let mut phi = DMatrix::zeros(m * n, ch.paths.len());
    for (i, path) in ch.paths.iter().enumerate() {
        let thetas: Vec<Complex64> = (0..n).map(|q| theta(q, path.doppler_frac, n)).collect();
        for k in 0..n {
            for l in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for (p, &w) in weights[i].iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let src_delay = (l as i64 - p as i64).rem_euclid(m as i64) as usize;
                    for (q, th) in thetas.iter().enumerate() {
                        if th.norm_sqr() == 0.0 {
                            continue;
                        }
                        let src_doppler = (k as i64 - path.doppler_index + q as i64).rem_euclid(n as i64) as usize;
                        let xv = x[(src_delay, src_doppler)];
                        if xv.norm_sqr() == 0.0 {
                            continue;
                        }
                        acc += xv * dd_gain(grid, l, k, p, q, path.doppler_index, path.doppler_frac) * w;
                    }
                }
                phi[(k * m + l, i)] = acc;
            }
        }
    }
    phi
}

/// Block-diagonal stacking of per-branch matrices, branch `b` scaled by
/// `weights[b]`.
pub fn stack_block_diagonal(blocks: &[DMatrix<Complex64>], weights: &[f64]) -> DMatrix<Complex64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for (b, &w) in blocks.iter().zip(weights) {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(&(b * Complex64::new(w, 0.0)));
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Gaussian tail probability via `erfc`.
pub fn q_function(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / SQRT_2)
}

/// `Q(x) ≈ e^{−x²/2}/12 + e^{−2x²/3}/4`.
pub fn q_approx(x: f64) -> f64 {
    (-x * x / 2.0).exp() / 12.0 + (-2.0 * x * x / 3.0).exp() / 4.0
}

/// Conditional pairwise error probability, exact and approximated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalPep {
    pub exact: f64,
    pub approx: f64,
}

/// PEP of deciding `X̂` for `X` given the path gains `h`, with
/// `diff = Φ(X) − Φ(X̂)` (pathloss included) and `rho = P/N₀`.
pub fn conditional_pep(diff: &DMatrix<Complex64>, h: &DVector<Complex64>, rho: f64) -> ConditionalPep {
    let dist = (diff * h).norm_squared();
    let x = (rho / 2.0 * dist).sqrt();
    ConditionalPep { exact: q_function(x), approx: q_approx(x) }
}

/// Monte Carlo mean of the linear pathloss gain over `samples` draws of
/// the user-to-RRH distance in meters.
pub fn mean_pathloss<R, F>(samples: usize, rng: &mut R, mut distance_m: F) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    if samples == 0 {
        return Err(invalid("need at least one pathloss sample"));
    }
    let mut total = 0.0;
    for _ in 0..samples {
        total += pathloss_gain(distance_m(rng) / 1000.0)?;
    }
    Ok(total / samples as f64)
}

/// Non-zero eigenvalues of `diffᴴ·diff`, in ascending order.
pub fn pep_spectrum(diff: &DMatrix<Complex64>) -> Vec<f64> {
    let gram = diff.adjoint() * diff;
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let max = eig.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out: Vec<f64> = eig.iter().copied().filter(|&l| l > RANK_TOLERANCE * max).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Channel-averaged PEP for i.i.d. path gains of variance `gain_var`.
pub fn averaged_pep_with_variance(lambdas: &[f64], rho: f64, gain_var: f64) -> f64 {
    let a: f64 = lambdas.iter().map(|l| 1.0 / (1.0 + rho * l * gain_var / 4.0)).product();
    let b: f64 = lambdas.iter().map(|l| 1.0 / (1.0 + rho * l * gain_var / 3.0)).product();
    a / 12.0 + b / 4.0
}

/// Channel-averaged PEP with path gains `CN(0, 2/(L₁+L₂))`.
pub fn averaged_pep(lambdas: &[f64], rho: f64, l1: usize, l2: usize) -> f64 {
    averaged_pep_with_variance(lambdas, rho, 2.0 / (l1 + l2) as f64)
}

/// High-SNR form of [`averaged_pep`], decaying as `ρ^{−R}`.
pub fn asymptotic_pep(lambdas: &[f64], rho: f64, l1: usize, l2: usize) -> f64 {
    let r = lambdas.len() as f64;
    if lambdas.is_empty() {
        return 1.0 / 3.0;
    }
    let geo = (lambdas.iter().map(|l| l.ln()).sum::<f64>() / r).exp();
    let total = (l1 + l2) as f64;
    ((geo / (2.0 * total)).powf(-r) / 12.0 + (2.0 * geo / (3.0 * total)).powf(-r) / 4.0) * rho.powf(-r)
}

/// How the bound weights the path gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainConvention {
    /// Equal variance on every path with unit total power per branch:
    /// `2/(L₁+L₂)` for two equal branches.
    #[default]
    Iid,
    /// Per-path variances of the simulation power-delay profile.
    Profile,
}

/// Inputs of the union bound.
#[derive(Debug, Clone)]
pub struct BoundSetup {
    pub grid: OtfsGrid,
    pub codebook: ScmaCodebook,
    pub allocation: AllocationScheme,
    pub scheme: Scheme,
    pub layout: HighwayLayout,
    pub profile: ChannelProfile,
    pub velocity_kmh: f64,
    pub carrier_hz: f64,
    /// Noise variance per delay-Doppler sample, watts.
    pub noise_var: f64,
    /// Draws of delays, Dopplers and timing offsets averaged by the bound.
    pub channel_draws: usize,
    /// Monte Carlo samples behind each mean pathloss.
    pub pathloss_samples: usize,
    pub gain_convention: GainConvention,
}

/// Mean linear pathloss of each serving branch of `scheme`.
pub fn branch_mean_pathloss(scheme: Scheme, layout: &HighwayLayout, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let branches = scheme.serving_sites(layout, &layout.sample_position(&mut stream(seed, 0, sub::PATHLOSS))).len();
    (0..branches)
        .map(|b| {
            let mut rng = stream(seed, b as u64, sub::PATHLOSS);
            mean_pathloss(samples, &mut rng, |r| {
                let p = layout.sample_position(r);
                scheme.serving_sites(layout, &p)[b].distance(&p)
            })
        })
        .collect()
}

/// Enumerates every frame of one user: `(codeword indices, frame)`.
fn enumerate_frames(setup: &BoundSetup, user: usize) -> Result<Vec<(Vec<usize>, DMatrix<Complex64>)>> {
    let q = setup.codebook.size();
    let t = codewords_per_frame(&setup.grid, setup.codebook.num_resources(), setup.allocation)?;
    let count = (q as u128).checked_pow(t as u32).unwrap_or(u128::MAX);
    // The bound visits every ordered pair of frames.
    let pairs = count.saturating_mul(count.saturating_sub(1));
    if pairs > MAX_HYPOTHESES {
        return Err(Error::TooManyHypotheses { hypotheses: pairs, limit: MAX_HYPOTHESES });
    }
    (0..count as usize)
        .map(|mut code| {
            let mut idx = vec![0; t];
            for slot in idx.iter_mut().rev() {
                *slot = code % q;
                code /= q;
            }
            let x = allocate(&idx, &setup.codebook, &setup.grid, setup.allocation, user)?;
            Ok((idx, x))
        })
        .collect()
}

fn bit_difference(a: &[usize], b: &[usize], q: usize) -> Result<u32> {
    let (ba, bb) = (demap(a, q)?, demap(b, q)?);
    Ok(ba.iter().zip(&bb).filter(|(x, y)| x != y).count() as u32)
}

/// Sum over ordered pairs of `Pr(X → X̂)·e(X, X̂)` for one user and one
/// channel draw, per power point.
fn draw_contribution(
    setup: &BoundSetup,
    frames: &[(Vec<usize>, DMatrix<Complex64>)],
    bit_diffs: &[Vec<u32>],
    pathloss: &[f64],
    rhos: &[f64],
    mut rng: impl Rng,
) -> Result<Vec<f64>> {
    let position = setup.layout.sample_position(&mut rng);
    let geometry = UserGeometry { position, velocity_kmh: setup.velocity_kmh };
    let sites: Vec<Point> = setup.scheme.serving_sites(&setup.layout, &position);
    let (_, powers) = setup.profile.resolve(&setup.grid)?;
    let channels = sites
        .iter()
        .map(|site| generate_channel(&geometry, site, &setup.profile, &setup.grid, setup.carrier_hz, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let total_paths: usize = channels.iter().map(|c| c.paths.len()).sum();
    let (weights, gain_var): (Vec<Vec<f64>>, f64) = match setup.gain_convention {
        GainConvention::Iid => {
            (channels.iter().map(|c| vec![1.0; c.paths.len()]).collect(), channels.len() as f64 / total_paths as f64)
        }
        GainConvention::Profile => (channels.iter().map(|_| powers.iter().map(|p| p.sqrt()).collect()).collect(), 1.0),
    };
    let stacked: Vec<DMatrix<Complex64>> = frames
        .iter()
        .map(|(_, x)| {
            let blocks: Vec<DMatrix<Complex64>> = channels
                .iter()
                .zip(&weights)
                .map(|(ch, w)| {
                    let mut phi = build_codeword_matrix(x, ch, &setup.grid);
                    for (i, wi) in w.iter().enumerate() {
                        phi.column_mut(i).scale_mut(*wi);
                    }
                    phi
                })
                .collect();
            let amps: Vec<f64> = pathloss.iter().map(|p| p.sqrt()).collect();
            stack_block_diagonal(&blocks, &amps)
        })
        .collect();
    let mut acc = vec![0.0; rhos.len()];
    for a in 0..frames.len() {
        for b in 0..frames.len() {
            if a == b || bit_diffs[a][b] == 0 {
                continue;
            }
            let lambdas = pep_spectrum(&(&stacked[a] - &stacked[b]));
            let e = bit_diffs[a][b] as f64;
            for (slot, &rho) in acc.iter_mut().zip(rhos) {
                *slot += averaged_pep_with_variance(&lambdas, rho, gain_var) * e;
            }
        }
    }
    Ok(acc)
}

/// ABER union bound at each transmit power (dBm per user).
///
/// Pairwise probabilities use the mean pathloss of each branch and are
/// averaged over `channel_draws` draws of path delays, Dopplers and timing
/// offsets. Users are the codebook's users.
pub fn aber_union_bound(setup: &BoundSetup, powers_dbm: &[f64], seed: u64, exec: Execution) -> Result<Vec<f64>> {
    setup.grid.validate()?;
    setup.layout.validate()?;
    if setup.channel_draws == 0 || !(setup.noise_var > 0.0) {
        return Err(invalid("bound needs channel draws and a positive noise variance"));
    }
    let cb = &setup.codebook;
    let q = cb.size();
    let pathloss = branch_mean_pathloss(setup.scheme, &setup.layout, setup.pathloss_samples, seed)?;
    let rhos: Vec<f64> = powers_dbm.iter().map(|p| dbm_to_watts(*p) / setup.noise_var).collect();
    let users = cb.num_users();
    let per_user = (0..users)
        .map(|j| {
            let frames = enumerate_frames(setup, j)?;
            let diffs = frames
                .iter()
                .map(|(a, _)| frames.iter().map(|(b, _)| bit_difference(a, b, q)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            Ok((frames, diffs))
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs = users * setup.channel_draws;
    let parts = map_indexed(exec, jobs, |job| {
        let (frames, diffs) = &per_user[job / setup.channel_draws];
        draw_contribution(setup, frames, diffs, &pathloss, &rhos, stream(seed, job as u64, sub::CHANNEL))
    });
    let mut total = vec![0.0; rhos.len()];
    for part in parts {
        for (t, v) in total.iter_mut().zip(part?) {
            *t += v;
        }
    }
    let frames = per_user[0].0.len() as f64;
    let t = codewords_per_frame(&setup.grid, cb.num_resources(), setup.allocation)? as f64;
    let norm = users as f64 * frames * t * (q as f64).log2() * setup.channel_draws as f64;
    Ok(total.into_iter().map(|v| v / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_dd_matrix;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> OtfsGrid {
        OtfsGrid::new(4, 2, 15e3, 8).unwrap()
    }

    fn random_frame(rng: &mut ChaCha8Rng, grid: &OtfsGrid) -> DMatrix<Complex64> {
        DMatrix::from_fn(grid.m, grid.n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn codeword_matrix_matches_channel_matrix() {
        let grid = OtfsGrid::new(8, 4, 15e3, 16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let profile = ChannelProfile { tap_spacing: 1.3, timing_offset_max: 2e-6, ..Default::default() };
        for _ in 0..5 {
            let user = UserGeometry { position: Point::new(300.0, 170.0), velocity_kmh: 300.0 };
            let ch = generate_channel(&user, &Point::new(1000.0, 0.0), &profile, &grid, 4e9, &mut rng).unwrap();
            let x = random_frame(&mut rng, &grid);
            let phi = build_codeword_matrix(&x, &ch, &grid);
            let h = DVector::from_vec(ch.gains());
            let lhs = &phi * h * Complex64::new(ch.amplitude(), 0.0);
            let rhs = build_dd_matrix(&ch, &grid).mul_vec(x.as_slice());
            let err: f64 = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let scale: f64 = rhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!(err <= 1e-8 * scale, "{err} vs {scale}");
        }
    }

    #[test]
    fn degenerate_codeword_matrices() {
        let grid = small_grid();
        let ch = MultipathChannel::flat(Complex64::new(1.0, 0.0));
        assert_eq!(build_codeword_matrix(&DMatrix::zeros(4, 2), &ch, &grid), DMatrix::zeros(8, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_frame(&mut rng, &grid);
        let phi = build_codeword_matrix(&x, &ch, &grid);
        for (a, b) in phi.column(0).iter().zip(x.as_slice()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn q_approximation_values() {
        assert_relative_eq!(q_approx(0.0), 1.0 / 3.0);
        assert!((q_approx(1.0) - 0.17890).abs() < 1e-5);
        assert!((q_function(1.0) - 0.15866).abs() < 1e-5);
        assert!(q_approx(40.0) == 0.0);
    }

    #[test]
    fn conditional_pep_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let diff = DMatrix::from_fn(8, 3, |_, _| Complex64::new(rng.random::<f64>(), rng.random::<f64>()));
        let h = DVector::from_fn(3, |_, _| Complex64::new(rng.random::<f64>(), 0.0));
        assert_relative_eq!(conditional_pep(&DMatrix::zeros(8, 3), &h, 10.0).approx, 1.0 / 3.0);
        assert_relative_eq!(conditional_pep(&diff, &h, 0.0).approx, 1.0 / 3.0);
        // For arguments in [1, 5] the approximation sits above the exact
        // value by at most 26 % (largest near 2).
        for scale in [1.0, 1.5, 2.0, 3.0, 4.0, 5.0] {
            let dist = (&diff * &h).norm_squared();
            let rho = 2.0 * scale * scale / dist;
            let p = conditional_pep(&diff, &h, rho);
            let rel = (p.approx - p.exact) / p.exact;
            assert!(rel > 0.0 && rel < 0.26, "{scale}: {p:?}");
        }
    }

    #[test]
    fn mean_pathloss_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = mean_pathloss(10, &mut rng, |_| 1000.0).unwrap();
        assert_relative_eq!(g, 10f64.powf(-14.21), max_relative = 1e-12);
        let layout = HighwayLayout::default();
        let pl = branch_mean_pathloss(Scheme::Comp, &layout, 200_000, 9).unwrap();
        assert!(((pl[0] - pl[1]) / pl[0]).abs() < 0.02, "{pl:?}");
    }

    #[test]
    fn spectrum_examples() {
        assert!(pep_spectrum(&DMatrix::zeros(6, 3)).is_empty());
        let mut d = DMatrix::zeros(6, 3);
        d[(0, 0)] = Complex64::new(0.0, 2.0);
        d[(3, 1)] = Complex64::new(2.0, 0.0);
        d[(5, 2)] = Complex64::new(-2.0, 0.0);
        for l in pep_spectrum(&d) {
            assert_relative_eq!(l, 4.0, epsilon = 1e-12);
        }
        // Rank-deficient difference keeps only non-zero eigenvalues.
        let mut r = DMatrix::zeros(6, 3);
        r.column_mut(0).fill(Complex64::new(1.0, 1.0));
        r.column_mut(1).fill(Complex64::new(1.0, 1.0));
        assert_eq!(pep_spectrum(&r).len(), 1);
    }

    #[test]
    fn averaged_pep_examples() {
        assert_relative_eq!(averaged_pep(&[1.0, 2.0], 0.0, 4, 4), 1.0 / 3.0);
        let v = averaged_pep(&[16.0], 1.0, 4, 4);
        assert_relative_eq!(v, 1.0 / 24.0 + 0.25 * 3.0 / 7.0, epsilon = 1e-15);
        assert!((v - 0.14881).abs() < 1e-5);
        let lambdas = [3.0, 5.0, 11.0];
        let rho = 100.0 * 8.0 / 3.0;
        let exact = averaged_pep(&lambdas, rho, 4, 4);
        let asym = asymptotic_pep(&lambdas, rho, 4, 4);
        assert!(((exact - asym) / exact).abs() < 0.05, "{exact} {asym}");
    }

    #[test]
    fn pairs_per_user() {
        let setup = BoundSetup {
            grid: small_grid(),
            codebook: ScmaCodebook::default_j6(),
            allocation: AllocationScheme::Delay,
            scheme: Scheme::Comp,
            layout: HighwayLayout::default(),
            profile: ChannelProfile::default(),
            velocity_kmh: 300.0,
            carrier_hz: 4e9,
            noise_var: 1e-15,
            channel_draws: 1,
            pathloss_samples: 10,
            gain_convention: GainConvention::Iid,
        };
        let frames = enumerate_frames(&setup, 2).unwrap();
        assert_eq!(frames.len(), 16);
        assert_eq!(frames.len() * (frames.len() - 1), 240);
        assert_eq!(frames[6].0, vec![1, 2]);
    }

    #[test]
    fn bound_decreases_and_parallel_matches() {
        let mut setup = BoundSetup {
            grid: small_grid(),
            codebook: ScmaCodebook::default_j6(),
            allocation: AllocationScheme::Delay,
            scheme: Scheme::Comp,
            layout: HighwayLayout::default(),
            profile: ChannelProfile { tap_spacing: 1.0, ..Default::default() },
            velocity_kmh: 300.0,
            carrier_hz: 4e9,
            noise_var: crate::channel::noise_power_watts(-174.0, 60e3),
            channel_draws: 4,
            pathloss_samples: 1000,
            gain_convention: GainConvention::Iid,
        };
        let powers = [0.0, 10.0, 20.0];
        let a = aber_union_bound(&setup, &powers, 5, Execution::Sequential).unwrap();
        let b = aber_union_bound(&setup, &powers, 5, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a[0] > a[1] && a[1] > a[2]);
        setup.grid = OtfsGrid::new(64, 16, 15e3, 0).unwrap();
        assert!(matches!(
            aber_union_bound(&setup, &powers, 5, Execution::Sequential),
            Err(Error::TooManyHypotheses { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn trace_identity(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = DMatrix::from_fn(16, 8, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let sum: f64 = pep_spectrum(&d).iter().sum();
            prop_assert!((sum - d.norm_squared()).abs() < 1e-9 * (1.0 + d.norm_squared()));
        }
    }
}
