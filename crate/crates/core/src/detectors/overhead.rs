use serde::Serialize;

use super::reduce::ReducedSystem;
use crate::codebook::ScmaCodebook;

/// Detector variant and its iteration counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorMode {
    Centralized { n_c: usize },
    Decentralized { n_i: usize, n_o: usize },
}

/// Dimensions entering the complexity and fronthaul accounting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadDims {
    pub m: usize,
    pub n: usize,
    pub j: usize,
    pub k: usize,
    pub d: usize,
    pub q: usize,
    /// Receive antennas per RRH.
    pub antennas: Vec<usize>,
    /// Channel paths per RRH, summed over users.
    pub paths: Vec<usize>,
    /// Mean number of observation rows connected to a block.
    pub s_bar: f64,
}

impl OverheadDims {
    /// Full-scale dimensions with one antenna per RRH.
    pub fn two_rrh(m: usize, n: usize, j: usize, k: usize, d: usize, q: usize, paths: [usize; 2]) -> Self {
        OverheadDims { m, n, j, k, d, q, antennas: vec![1, 1], paths: paths.to_vec(), s_bar: 0.0 }
    }

    /// Dimensions of a reduced system, with `M·N` taken as rows per RRH.
    pub fn from_system(sys: &ReducedSystem, codebook: &ScmaCodebook) -> Self {
        let rrhs = sys.num_rrhs.max(1);
        let mn = sys.num_rows() / rrhs;
        let blocks = sys.num_blocks();
        let k = codebook.num_resources();
        let per_rrh_paths = sys.csi_paths / rrhs;
        OverheadDims {
            m: mn,
            n: 1,
            j: sys.layout.num_users,
            k,
            d: sys.num_nonzero,
            q: codebook.size(),
            antennas: vec![1; rrhs],
            paths: vec![per_rrh_paths; rrhs],
            s_bar: if blocks == 0 { 0.0 } else { sys.num_edges() as f64 / blocks as f64 },
        }
    }

    /// `M·N·J·D/K`, the number of grouped non-zero symbols.
    pub fn grouped_symbols(&self) -> u64 {
        (self.m * self.n * self.j * self.d / self.k) as u64
    }
}

/// Complexity order and fronthaul load of one detector configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadReport {
    /// Operations per GAEP iteration.
    pub complexity_per_iteration: f64,
    /// Iteration multiplier (`n_c` or `n_o·n_I`).
    pub iterations: usize,
    pub complexity_total: f64,
    pub complex_values_exchanged: u64,
}

pub(crate) fn centralized_exchange(dims: &OverheadDims) -> u64 {
    let mn = (dims.m * dims.n) as u64;
    let antennas: u64 = dims.antennas.iter().map(|&a| a as u64).sum();
    let csi: u64 = dims.antennas.iter().zip(&dims.paths).map(|(&a, &l)| (a * l) as u64).sum();
    mn * antennas + 3 * csi + 2 * dims.grouped_symbols()
}

pub(crate) fn decentralized_exchange(dims: &OverheadDims, n_o: usize) -> u64 {
    2 * dims.grouped_symbols() * n_o as u64
}

/// Closed-form complexity and exchange accounting for a detector.
pub fn overhead_report(mode: DetectorMode, dims: &OverheadDims) -> OverheadReport {
    let sd = dims.s_bar * dims.d as f64;
    let mnjdq = dims.grouped_symbols() as f64 * dims.q as f64;
    let (per_iter, iterations, exchanged) = match mode {
        DetectorMode::Centralized { n_c } => {
            (6.0 * sd + sd * dims.q as f64 + 2.0 * mnjdq, n_c, centralized_exchange(dims))
        }
        DetectorMode::Decentralized { n_i, n_o } => {
            (6.0 * sd + sd * dims.q as f64 + 4.0 * mnjdq, n_o * n_i, decentralized_exchange(dims, n_o))
        }
    };
    OverheadReport {
        complexity_per_iteration: per_iter,
        iterations,
        complexity_total: per_iter * iterations as f64,
        complex_values_exchanged: exchanged,
    }
}
