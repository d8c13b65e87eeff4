use num_complex::Complex64;

use super::messages::{
    convergence_indicator, damp, extrinsic_combine, observation_update, project, variable_update, Gaussian,
};
use super::overhead::{centralized_exchange, OverheadDims};
use super::reduce::ReducedSystem;
use super::{decisions_to_bits, hard_decisions, DetectorConfig, DetectorResult};
use crate::codebook::ScmaCodebook;
use crate::error::{Error, Result};

/// Raw output of one GAEP run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaepOutput {
    /// Retained posteriors (iteration with the highest convergence
    /// indicator, later iterations winning ties).
    pub posteriors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub convergence: Vec<f64>,
}

fn candidates(codebook: &ScmaCodebook, user: usize) -> Vec<&[Complex64]> {
    (0..codebook.size()).map(|q| codebook.nonzero(user, q)).collect()
}

fn check_finite(msgs: &[Gaussian], what: &str) -> Result<()> {
    if msgs.iter().all(|g| g.mean.re.is_finite() && g.mean.im.is_finite() && g.var.is_finite() && g.var > 0.0) {
        Ok(())
    } else {
        Err(Error::Internal(format!("non-finite {what} message")))
    }
}

/// Runs GAEP on `sys` for at most `max_iter` flooding iterations.
///
/// `log_prior[c][q]` is the log a-priori probability of codeword `q` on block
/// `c`; `None` means equiprobable codewords.
pub fn run_gaep(
    sys: &ReducedSystem,
    codebook: &ScmaCodebook,
    log_prior: Option<&[Vec<f64>]>,
    cfg: &DetectorConfig,
    max_iter: usize,
) -> Result<GaepOutput> {
    let d = sys.num_nonzero;
    let eps = cfg.min_variance;
    let layout = sys.layout;
    if layout.num_users > codebook.num_users() || d != codebook.num_nonzero() {
        return Err(Error::InvalidInput("system does not match the codebook".into()));
    }
    let flat: Vec<f64> = Vec::new();
    let prior_of = |c: usize| -> &[f64] { log_prior.map_or(flat.as_slice(), |p| p[c].as_slice()) };
    let cands: Vec<Vec<&[Complex64]>> = (0..layout.num_users).map(|j| candidates(codebook, j)).collect();

    // Initial variable-to-observation messages: projection of the prior.
    let mut var_msg = vec![Gaussian::new(Complex64::new(0.0, 0.0), 1.0); sys.num_edges() * d];
    for c in 0..sys.num_blocks() {
        let cs = &cands[layout.user_of(c)];
        let probs = variable_update(cs, prior_of(c), &[]);
        let init = project(cs, &probs, eps);
        for &e in sys.block_edges(c) {
            var_msg[e * d..(e + 1) * d].copy_from_slice(&init);
        }
    }
    let mut obs_msg = var_msg.clone();

    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut convergence = Vec::new();
    let mut iterations = 0;
    let mut obs = Vec::new();
    for _ in 0..max_iter {
        iterations += 1;
        // Observation nodes.
        for row in 0..sys.num_rows() {
            let mut mean = Complex64::new(0.0, 0.0);
            let mut var = sys.noise_var;
            for e in sys.row_edges(row) {
                for (h, m) in sys.edge_h(e).iter().zip(&var_msg[e * d..(e + 1) * d]) {
                    mean += h * m.mean;
                    var += h.norm_sqr() * m.var;
                }
            }
            for e in sys.row_edges(row) {
                for (i, h) in sys.edge_h(e).iter().enumerate() {
                    if h.norm_sqr() > 0.0 {
                        obs_msg[e * d + i] = observation_update(sys.y[row], mean, var, *h, var_msg[e * d + i], eps);
                    }
                }
            }
        }
        check_finite(&obs_msg, "observation")?;

        // Variable nodes.
        let mut posteriors = Vec::with_capacity(sys.num_blocks());
        for c in 0..sys.num_blocks() {
            let cs = &cands[layout.user_of(c)];
            obs.clear();
            for &e in sys.block_edges(c) {
                for (i, h) in sys.edge_h(e).iter().enumerate() {
                    if h.norm_sqr() > 0.0 {
                        obs.push((i, obs_msg[e * d + i]));
                    }
                }
            }
            let probs = variable_update(cs, prior_of(c), &obs);
            let post = project(cs, &probs, eps);
            for &e in sys.block_edges(c) {
                for (i, h) in sys.edge_h(e).iter().enumerate() {
                    if h.norm_sqr() > 0.0 {
                        let ext = extrinsic_combine(post[i], obs_msg[e * d + i]);
                        var_msg[e * d + i] = damp(ext, var_msg[e * d + i], cfg.damping, eps);
                    }
                }
            }
            posteriors.push(probs);
        }
        check_finite(&var_msg, "variable")?;

        let delta = convergence_indicator(&posteriors, cfg.rho);
        convergence.push(delta);
        if best.as_ref().is_none_or(|(b, _)| delta >= *b) {
            best = Some((delta, posteriors));
        }
        if delta >= 1.0 {
            break;
        }
    }
    let posteriors = match best {
        Some((_, p)) => p,
        None => (0..sys.num_blocks()).map(|c| variable_update(&cands[layout.user_of(c)], prior_of(c), &[])).collect(),
    };
    Ok(GaepOutput { posteriors, iterations, convergence })
}

/// Centralized GAEP on a (typically stacked) system.
pub fn gaep_centralized(sys: &ReducedSystem, codebook: &ScmaCodebook, cfg: &DetectorConfig) -> Result<DetectorResult> {
    cfg.validate()?;
    let out = run_gaep(sys, codebook, None, cfg, cfg.n_c)?;
    let decisions = hard_decisions(&out.posteriors);
    let bits = decisions_to_bits(&decisions, &sys.layout, codebook.size())?;
    let dims = OverheadDims::from_system(sys, codebook);
    Ok(DetectorResult {
        posteriors: out.posteriors,
        decisions,
        bits,
        iterations: out.iterations,
        convergence: out.convergence,
        exchanged_complex_values: centralized_exchange(&dims),
    })
}
