use num_complex::Complex64;

use super::reduce::ReducedSystem;
use crate::codebook::{demap, ScmaCodebook};
use crate::error::{invalid, Error, Result};

/// Largest hypothesis count the exhaustive search accepts.
pub const MAX_HYPOTHESES: u128 = 1 << 20;

/// Exhaustive ML decision.
#[derive(Debug, Clone, PartialEq)]
pub struct MlDecision {
    /// Codeword index per block.
    pub indices: Vec<usize>,
    /// Decoded bits per user.
    pub bits: Vec<Vec<u8>>,
    /// `‖y − H x̂‖²` of the winning hypothesis.
    pub metric: f64,
}

/// Minimizes `‖y − H x‖²` over every codeword sequence of the system.
///
/// Intended for single-user frames; any system within [`MAX_HYPOTHESES`]
/// joint hypotheses is accepted. Ties keep the lexicographically first
/// sequence.
pub fn ml_detect_single_user(sys: &ReducedSystem, codebook: &ScmaCodebook) -> Result<MlDecision> {
    let q = codebook.size();
    let blocks = sys.num_blocks();
    let hypotheses = (q as u128).checked_pow(blocks as u32).unwrap_or(u128::MAX);
    if hypotheses > MAX_HYPOTHESES {
        return Err(Error::TooManyHypotheses { hypotheses, limit: MAX_HYPOTHESES });
    }
    if sys.layout.num_users > codebook.num_users() {
        return Err(invalid("system has more users than the codebook"));
    }
    // contrib[c][q]: (row, H_c·χ_q) pairs.
    let d = sys.num_nonzero;
    let contrib: Vec<Vec<Vec<(usize, Complex64)>>> = (0..blocks)
        .map(|c| {
            let user = sys.layout.user_of(c);
            (0..q)
                .map(|cw| {
                    let chi = codebook.nonzero(user, cw);
                    sys.block_edges(c)
                        .iter()
                        .map(|&e| {
                            let v = sys.edge_h(e).iter().zip(chi).map(|(h, x)| h * x).sum::<Complex64>();
                            debug_assert_eq!(sys.edge_h(e).len(), d);
                            (sys.edge_row(e), v)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut search = Search {
        contrib: &contrib,
        q,
        residual: sys.y.clone(),
        current: vec![0; blocks],
        best: vec![0; blocks],
        best_metric: f64::INFINITY,
    };
    search.descend(0);
    let bits =
        (0..sys.layout.num_users).map(|j| demap(&search.best[sys.layout.blocks_of(j)], q)).collect::<Result<_>>()?;
    Ok(MlDecision { indices: search.best, bits, metric: search.best_metric })
}

struct Search<'a> {
    contrib: &'a [Vec<Vec<(usize, Complex64)>>],
    q: usize,
    residual: Vec<Complex64>,
    current: Vec<usize>,
    best: Vec<usize>,
    best_metric: f64,
}

impl Search<'_> {
    fn descend(&mut self, c: usize) {
        if c == self.contrib.len() {
            let metric: f64 = self.residual.iter().map(|r| r.norm_sqr()).sum();
            if metric < self.best_metric {
                self.best_metric = metric;
                self.best.copy_from_slice(&self.current);
            }
            return;
        }
        for cw in 0..self.q {
            for &(row, v) in &self.contrib[c][cw] {
                self.residual[row] -= v;
            }
            self.current[c] = cw;
            self.descend(c + 1);
            for &(row, v) in &self.contrib[c][cw] {
                self.residual[row] += v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_dd_matrix, generate_channel, ChannelProfile, Point, UserGeometry};
    use crate::codebook::{allocate, AllocationScheme};
    use crate::detectors::reduce_system;
    use crate::modem::OtfsGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_recovery() {
        let grid = OtfsGrid::new(4, 2, 15e3, 8).unwrap();
        let cb = ScmaCodebook::default_j6();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let profile = ChannelProfile::default();
        for trial in 0..20 {
            let j = trial % 6;
            let user = UserGeometry { position: Point::new(rng.random_range(0.0..1000.0), 170.0), velocity_kmh: 300.0 };
            let mut ch = generate_channel(&user, &Point::new(0.0, 0.0), &profile, &grid, 4e9, &mut rng).unwrap();
            ch.pathloss_db = 0.0;
            let h = build_dd_matrix(&ch, &grid);
            let idx: Vec<usize> = (0..2).map(|_| rng.random_range(0..4)).collect();
            let one = cb.subset(&[j]).unwrap();
            let x = allocate(&idx, &one, &grid, AllocationScheme::Delay, 0).unwrap();
            let y = h.mul_vec(x.as_slice());
            let sys = reduce_system(&y, &[h], &[1.0], 0.0, &one, &grid, AllocationScheme::Delay, 4).unwrap();
            let r = ml_detect_single_user(&sys, &one).unwrap();
            assert_eq!(r.indices, idx);
            assert!(r.metric < 1e-20);
        }
    }

    #[test]
    fn guard_refuses_large_frames() {
        let grid = OtfsGrid::new(64, 16, 15e3, 0).unwrap();
        let cb = ScmaCodebook::default_j6();
        let y = vec![Complex64::new(0.0, 0.0); grid.len()];
        let sys = reduce_system(
            &y,
            &[crate::sparse::CsrMatrix::identity(grid.len())],
            &[1.0],
            1.0,
            &cb,
            &grid,
            AllocationScheme::Delay,
            1,
        )
        .unwrap();
        assert!(matches!(ml_detect_single_user(&sys, &cb), Err(Error::TooManyHypotheses { .. })));
    }
}
