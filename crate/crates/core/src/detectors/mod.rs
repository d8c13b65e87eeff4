//! Multi-user detection on the grouped sparse model.
//!
//! [`reduce_system`] turns per-user delay-Doppler matrices into the grouped
//! model `y = H x + w`, where `x` stacks the D non-zero entries of every
//! transmitted codeword ("block"). The GAEP detectors run Gaussian message
//! passing on the factor graph of that model; [`ml_detect_single_user`]
//! enumerates hypotheses exhaustively for small single-user frames.

mod decentralized;
mod gaep;
mod messages;
mod ml;
mod overhead;
mod reduce;

use serde::{Deserialize, Serialize};

pub use decentralized::{gaep_decentralized, DecentralizedResult};
pub use gaep::{gaep_centralized, run_gaep, GaepOutput};
pub use messages::{
    convergence_indicator, damp, extrinsic_combine, observation_update, project, variable_update, Extrinsic, Gaussian,
};
pub use ml::{ml_detect_single_user, MlDecision, MAX_HYPOTHESES};
pub use overhead::{overhead_report, DetectorMode, OverheadDims, OverheadReport};
pub use reduce::{reduce_system, ReducedSystem, UserLayout};

/// Which detector a simulation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Centralized,
    Decentralized,
    Ml,
}

/// Detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub algorithm: Algorithm,
    /// Damping factor Δ in (0, 1].
    pub damping: f64,
    /// Minimum allowed variance ε.
    pub min_variance: f64,
    /// Convergence threshold ϱ: a block counts as converged when its
    /// largest posterior reaches `1 − ϱ`.
    pub rho: f64,
    /// Iterations of the centralized detector.
    pub n_c: usize,
    /// Inner iterations per RRH of the decentralized detector.
    pub n_i: usize,
    /// Outer exchange rounds of the decentralized detector.
    pub n_o: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            algorithm: Algorithm::Centralized,
            damping: 0.3,
            min_variance: 1e-8,
            rho: 0.1,
            n_c: 20,
            n_i: 3,
            n_o: 5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(crate::Error::InvalidInput(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.min_variance > 0.0) || !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(crate::Error::InvalidInput("min_variance must be > 0 and rho in (0, 1)".into()));
        }
        if self.n_c == 0 || self.n_i == 0 {
            return Err(crate::Error::InvalidInput("iteration counts must be positive".into()));
        }
        Ok(())
    }
}

/// Output of a GAEP detector for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorResult {
    /// `posteriors[c][q]`: probability that block `c` carries codeword `q`.
    pub posteriors: Vec<Vec<f64>>,
    /// Hard codeword decision per block.
    pub decisions: Vec<usize>,
    /// Decoded bits per user.
    pub bits: Vec<Vec<u8>>,
    pub iterations: usize,
    /// Convergence indicator after every iteration.
    pub convergence: Vec<f64>,
    /// Complex values moved over the fronthaul for this frame.
    pub exchanged_complex_values: u64,
}

/// Hard decisions with lowest-index tie breaking.
pub fn hard_decisions(posteriors: &[Vec<f64>]) -> Vec<usize> {
    posteriors
        .iter()
        .map(|p| {
            p.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (q, &v)| if v > best.1 { (q, v) } else { best }).0
        })
        .collect()
}

/// Splits block decisions into per-user bit vectors.
pub(crate) fn decisions_to_bits(decisions: &[usize], layout: &UserLayout, q: usize) -> crate::Result<Vec<Vec<u8>>> {
    (0..layout.num_users).map(|j| crate::codebook::demap(&decisions[layout.blocks_of(j)], q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_pick_lowest_index() {
        assert_eq!(hard_decisions(&[vec![0.25; 4], vec![0.1, 0.4, 0.4, 0.1]]), vec![0, 1]);
    }

    #[test]
    fn default_config() {
        let c = DetectorConfig::default();
        assert_eq!((c.damping, c.min_variance, c.rho, c.n_c), (0.3, 1e-8, 0.1, 20));
        assert!(c.validate().is_ok());
        assert!(DetectorConfig { damping: 0.0, ..c }.validate().is_err());
    }
}
