use num_complex::Complex64;

use super::gaep::run_gaep;
use super::messages::{project, Gaussian};
use super::overhead::{decentralized_exchange, OverheadDims};
use super::reduce::ReducedSystem;
use super::{decisions_to_bits, hard_decisions, DetectorConfig, DetectorResult};
use crate::codebook::ScmaCodebook;
use crate::error::{invalid, Result};
use crate::exec::{join, Execution};

/// Variance used for an extrinsic message whose Gaussian division is not
/// positive, relative to the mean codeword entry energy.
pub const EXTRINSIC_VARIANCE_CAP: f64 = 1e6;

/// Per-RRH outputs of the decentralized detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DecentralizedResult {
    pub per_rrh: [DetectorResult; 2],
    /// Extrinsic variances replaced by the cap over all rounds.
    pub capped_extrinsics: usize,
}

struct Round {
    posteriors: Vec<Vec<f64>>,
    iterations: usize,
    convergence: Vec<f64>,
    extrinsic: Vec<Vec<Gaussian>>,
    capped: usize,
}

fn local_round(
    sys: &ReducedSystem,
    codebook: &ScmaCodebook,
    cfg: &DetectorConfig,
    peer: Option<&[Vec<Gaussian>]>,
) -> Result<Round> {
    let layout = sys.layout;
    let cands = |c: usize| -> Vec<&[Complex64]> {
        let user = layout.user_of(c);
        (0..codebook.size()).map(|q| codebook.nonzero(user, q)).collect()
    };
    let log_prior: Option<Vec<Vec<f64>>> = peer.map(|peer| {
        (0..sys.num_blocks())
            .map(|c| {
                cands(c)
                    .iter()
                    .map(|chi| -chi.iter().zip(&peer[c]).map(|(x, g)| (x - g.mean).norm_sqr() / g.var).sum::<f64>())
                    .collect()
            })
            .collect()
    });
    let out = run_gaep(sys, codebook, log_prior.as_deref(), cfg, cfg.n_i)?;
    let cap = EXTRINSIC_VARIANCE_CAP * codebook.mean_entry_energy();
    let mut capped = 0;
    let extrinsic = (0..sys.num_blocks())
        .map(|c| {
            let post = project(&cands(c), &out.posteriors[c], cfg.min_variance);
            post.iter()
                .enumerate()
                .map(|(i, p)| {
                    let (peer_prec, peer_wm) = match peer {
                        Some(peer) => (1.0 / peer[c][i].var, peer[c][i].mean / peer[c][i].var),
                        None => (0.0, Complex64::new(0.0, 0.0)),
                    };
                    let prec = 1.0 / p.var - peer_prec;
                    if prec > 1.0 / cap {
                        Gaussian::new((p.mean / p.var - peer_wm) / prec, 1.0 / prec)
                    } else {
                        capped += 1;
                        Gaussian::new(p.mean, cap)
                    }
                })
                .collect()
        })
        .collect();
    Ok(Round {
        posteriors: out.posteriors,
        iterations: out.iterations,
        convergence: out.convergence,
        extrinsic,
        capped,
    })
}

/// Decentralized GAEP over two RRHs exchanging extrinsic Gaussians.
///
/// Each of the `n_o` rounds runs `n_I` local GAEP iterations at both RRHs
/// (concurrently under [`Execution::Parallel`]), starting from a prior built
/// from the peer's last extrinsic message. The first round uses flat priors.
pub fn gaep_decentralized(
    systems: [&ReducedSystem; 2],
    codebook: &ScmaCodebook,
    cfg: &DetectorConfig,
    exec: Execution,
) -> Result<DecentralizedResult> {
    cfg.validate()?;
    if cfg.n_o == 0 {
        return Err(invalid("decentralized detection needs at least one outer round"));
    }
    let [a, b] = systems;
    if a.layout != b.layout || a.num_nonzero != b.num_nonzero {
        return Err(invalid("both RRHs must see the same block layout"));
    }
    let mut inbox: [Option<Vec<Vec<Gaussian>>>; 2] = [None, None];
    let mut last: Option<(Round, Round)> = None;
    let mut capped = 0;
    for _ in 0..cfg.n_o {
        let (ra, rb) = join(
            exec,
            || local_round(a, codebook, cfg, inbox[0].as_deref()),
            || local_round(b, codebook, cfg, inbox[1].as_deref()),
        );
        let (ra, rb) = (ra?, rb?);
        capped += ra.capped + rb.capped;
        inbox = [Some(rb.extrinsic.clone()), Some(ra.extrinsic.clone())];
        last = Some((ra, rb));
    }
    let (ra, rb) = last.expect("n_o >= 1");
    let exchanged = decentralized_exchange(&OverheadDims::from_system(a, codebook), cfg.n_o);
    let finish = |r: Round, sys: &ReducedSystem| -> Result<DetectorResult> {
        let decisions = hard_decisions(&r.posteriors);
        let bits = decisions_to_bits(&decisions, &sys.layout, codebook.size())?;
        Ok(DetectorResult {
            posteriors: r.posteriors,
            decisions,
            bits,
            iterations: r.iterations,
            convergence: r.convergence,
            exchanged_complex_values: exchanged,
        })
    };
    Ok(DecentralizedResult { per_rrh: [finish(ra, a)?, finish(rb, b)?], capped_extrinsics: capped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_dd_matrix, generate_channel, ChannelProfile, Point, UserGeometry};
    use crate::codebook::{allocate, AllocationScheme};
    use crate::detectors::{gaep_centralized, reduce_system};
    use crate::modem::OtfsGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn two_rrh(seed: u64, noise: f64) -> (ReducedSystem, ReducedSystem, Vec<usize>) {
        let grid = OtfsGrid::new(8, 4, 15e3, 10).unwrap();
        let cb = ScmaCodebook::default_j6();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = ChannelProfile { tap_spacing: 1.0, ..Default::default() };
        let rrhs = [Point::new(0.0, 0.0), Point::new(1000.0, 0.0)];
        let mut mats = [Vec::new(), Vec::new()];
        let mut ys = [vec![Complex64::new(0.0, 0.0); 32], vec![Complex64::new(0.0, 0.0); 32]];
        let mut truth = Vec::new();
        for j in 0..6 {
            let user = UserGeometry { position: Point::new(rng.random_range(0.0..1000.0), 160.0), velocity_kmh: 300.0 };
            let idx: Vec<usize> = (0..8).map(|_| rng.random_range(0..4)).collect();
            let x = allocate(&idx, &cb, &grid, AllocationScheme::Delay, j).unwrap();
            for u in 0..2 {
                let mut ch = generate_channel(&user, &rrhs[u], &profile, &grid, 4e9, &mut rng).unwrap();
                ch.pathloss_db = 0.0;
                let h = build_dd_matrix(&ch, &grid);
                for (a, b) in ys[u].iter_mut().zip(h.mul_vec(x.as_slice())) {
                    *a += b;
                }
                mats[u].push(h);
            }
            truth.extend(idx);
        }
        let mut systems = Vec::new();
        for u in 0..2 {
            let mut y = ys[u].clone();
            for v in y.iter_mut() {
                let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                *v += Complex64::new(a, b) * (noise / 2.0).sqrt();
            }
            systems
                .push(reduce_system(&y, &mats[u], &[1.0; 6], noise, &cb, &grid, AllocationScheme::Delay, 24).unwrap());
        }
        let b = systems.pop().unwrap();
        let a = systems.pop().unwrap();
        (a, b, truth)
    }

    #[test]
    fn single_round_equals_independent_runs() {
        let cb = ScmaCodebook::default_j6();
        let (a, b, _) = two_rrh(5, 0.05);
        let cfg = DetectorConfig { n_o: 1, n_i: 6, ..Default::default() };
        let dec = gaep_decentralized([&a, &b], &cb, &cfg, Execution::Sequential).unwrap();
        for (sys, res) in [(&a, &dec.per_rrh[0]), (&b, &dec.per_rrh[1])] {
            let solo = gaep_centralized(sys, &cb, &DetectorConfig { n_c: 6, ..cfg }).unwrap();
            assert_eq!(solo.bits, res.bits);
            assert_eq!(solo.posteriors, res.posteriors);
        }
        assert_eq!(dec.per_rrh[0].exchanged_complex_values, 2 * 48 * 2);
    }

    #[test]
    fn parallel_matches_sequential() {
        let cb = ScmaCodebook::default_j6();
        let (a, b, _) = two_rrh(9, 0.1);
        let cfg = DetectorConfig { n_o: 4, n_i: 3, ..Default::default() };
        let s = gaep_decentralized([&a, &b], &cb, &cfg, Execution::Sequential).unwrap();
        let p = gaep_decentralized([&a, &b], &cb, &cfg, Execution::Parallel).unwrap();
        assert_eq!(s, p);
    }

    #[test]
    fn cooperation_recovers_clean_frames() {
        let cb = ScmaCodebook::default_j6();
        let mut errors = 0;
        let mut total = 0;
        for seed in 0..5 {
            let (a, b, truth) = two_rrh(seed, 1e-3);
            let cfg = DetectorConfig { n_o: 5, n_i: 4, ..Default::default() };
            let dec = gaep_decentralized([&a, &b], &cb, &cfg, Execution::Sequential).unwrap();
            errors += dec.per_rrh[0].decisions.iter().zip(&truth).filter(|(x, y)| x != y).count();
            total += truth.len();
        }
        assert!(errors * 20 < total, "{errors} of {total}");
    }
}
