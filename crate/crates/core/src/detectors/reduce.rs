use std::ops::Range;

use num_complex::Complex64;

use crate::channel::DelayDopplerMatrix;
use crate::codebook::{codewords_per_frame, entry_position, AllocationScheme, ScmaCodebook};
use crate::error::{invalid, Error, Result};
use crate::modem::OtfsGrid;

/// Block bookkeeping: block `c` belongs to user `c / blocks_per_user` and is
/// that user's codeword `c % blocks_per_user`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserLayout {
    pub num_users: usize,
    pub blocks_per_user: usize,
}

impl UserLayout {
    pub fn num_blocks(&self) -> usize {
        self.num_users * self.blocks_per_user
    }

    pub fn user_of(&self, block: usize) -> usize {
        block / self.blocks_per_user
    }

    pub fn blocks_of(&self, user: usize) -> Range<usize> {
        user * self.blocks_per_user..(user + 1) * self.blocks_per_user
    }
}

/// Grouped sparse model `y = H x + w` with its factor-graph adjacency.
///
/// Edges are stored row by row. Edge `e` links observation `edge_row[e]` to
/// block `edge_block[e]` through the D-element row block
/// `h[e·D .. (e+1)·D]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub y: Vec<Complex64>,
    pub noise_var: f64,
    pub layout: UserLayout,
    pub num_nonzero: usize,
    row_ptr: Vec<usize>,
    edge_block: Vec<usize>,
    edge_row: Vec<usize>,
    h: Vec<Complex64>,
    /// Edge ids touching each block, J(c).
    block_edges: Vec<Vec<usize>>,
    /// Number of RRHs whose rows are stacked here.
    pub num_rrhs: usize,
    /// Channel paths described by the CSI behind these rows, Σ_j L_uj per RRH.
    pub csi_paths: usize,
}

impl ReducedSystem {
    /// Builds a system from per-row lists of `(block, D-element row block)`.
    pub fn from_rows(
        y: Vec<Complex64>,
        rows: Vec<Vec<(usize, Vec<Complex64>)>>,
        noise_var: f64,
        layout: UserLayout,
        num_nonzero: usize,
    ) -> Result<Self> {
        if y.len() != rows.len() {
            return Err(invalid(format!("{} observations but {} rows", y.len(), rows.len())));
        }
        if !(noise_var >= 0.0) {
            return Err(invalid("noise variance must be non-negative"));
        }
        let mut row_ptr = vec![0];
        let mut edge_block = Vec::new();
        let mut edge_row = Vec::new();
        let mut h = Vec::new();
        let mut block_edges = vec![Vec::new(); layout.num_blocks()];
        for (d, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|(c, _)| *c);
            for (c, hb) in row {
                if c >= layout.num_blocks() || hb.len() != num_nonzero {
                    return Err(Error::Internal(format!("inconsistent grouping at row {d}, block {c}")));
                }
                if edge_row.last() == Some(&d) && edge_block.last() == Some(&c) {
                    return Err(Error::Internal(format!("duplicate block {c} in row {d}")));
                }
                if hb.iter().all(|v| v.norm_sqr() == 0.0) {
                    continue;
                }
                block_edges[c].push(edge_block.len());
                edge_block.push(c);
                edge_row.push(d);
                h.extend(hb);
            }
            row_ptr.push(edge_block.len());
        }
        Ok(ReducedSystem {
            y,
            noise_var,
            layout,
            num_nonzero,
            row_ptr,
            edge_block,
            edge_row,
            h,
            block_edges,
            num_rrhs: 1,
            csi_paths: 0,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.y.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.layout.num_blocks()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_block.len()
    }

    /// Edge ids of row `d`.
    pub fn row_edges(&self, d: usize) -> Range<usize> {
        self.row_ptr[d]..self.row_ptr[d + 1]
    }

    /// Blocks connected to row `d`, I(d).
    pub fn row_blocks(&self, d: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_block[self.row_edges(d)].iter().copied()
    }

    /// Edge ids of block `c`, one per row in J(c).
    pub fn block_edges(&self, c: usize) -> &[usize] {
        &self.block_edges[c]
    }

    pub fn edge_block(&self, e: usize) -> usize {
        self.edge_block[e]
    }

    pub fn edge_row(&self, e: usize) -> usize {
        self.edge_row[e]
    }

    /// Row block `h_{d,c}` of edge `e`.
    pub fn edge_h(&self, e: usize) -> &[Complex64] {
        &self.h[e * self.num_nonzero..(e + 1) * self.num_nonzero]
    }

    /// Σ_d |I(d)|, the number of factor-graph edges.
    pub fn edge_count(&self) -> usize {
        self.num_edges()
    }

    /// `H·x` for a stacked block vector `x` (D entries per block).
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let d = self.num_nonzero;
        (0..self.num_rows())
            .map(|row| {
                self.row_edges(row)
                    .map(|e| {
                        let c = self.edge_block[e];
                        self.edge_h(e).iter().zip(&x[c * d..(c + 1) * d]).map(|(h, v)| h * v).sum::<Complex64>()
                    })
                    .sum()
            })
            .collect()
    }

    /// Stacks the rows of several systems over the same blocks.
    pub fn stack(parts: &[&ReducedSystem]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| invalid("nothing to stack"))?;
        let mut y = Vec::new();
        let mut rows = Vec::new();
        for part in parts {
            if part.layout != first.layout || part.num_nonzero != first.num_nonzero {
                return Err(invalid("stacked systems disagree on block layout"));
            }
            if part.noise_var != first.noise_var {
                return Err(invalid("stacked systems must share one noise variance"));
            }
            y.extend_from_slice(&part.y);
            for d in 0..part.num_rows() {
                rows.push(part.row_edges(d).map(|e| (part.edge_block[e], part.edge_h(e).to_vec())).collect());
            }
        }
        let mut out = ReducedSystem::from_rows(y, rows, first.noise_var, first.layout, first.num_nonzero)?;
        out.num_rrhs = parts.iter().map(|p| p.num_rrhs).sum();
        out.csi_paths = parts.iter().map(|p| p.csi_paths).sum();
        Ok(out)
    }
}

/// Builds the grouped model of one RRH.
///
/// `matrices[j]` is the delay-Doppler matrix from user `j` (pathloss
/// included), `powers[j]` the user's transmit power. Columns of users'
/// empty resources are dropped and the remaining ones grouped per codeword.
#[allow(clippy::too_many_arguments)]
pub fn reduce_system(
    y: &[Complex64],
    matrices: &[DelayDopplerMatrix],
    powers: &[f64],
    noise_var: f64,
    codebook: &ScmaCodebook,
    grid: &OtfsGrid,
    scheme: AllocationScheme,
    csi_paths: usize,
) -> Result<ReducedSystem> {
    let num_users = matrices.len();
    if powers.len() != num_users || num_users > codebook.num_users() || num_users == 0 {
        return Err(invalid("one matrix and one power per user are required"));
    }
    let mn = grid.len();
    if y.len() != mn || matrices.iter().any(|h| h.nrows() != mn || h.ncols() != mn) {
        return Err(invalid("matrix or observation size does not match the grid"));
    }
    let k = codebook.num_resources();
    let d = codebook.num_nonzero();
    let per_user = codewords_per_frame(grid, k, scheme)?;
    let layout = UserLayout { num_users, blocks_per_user: per_user };

    let lookups: Vec<Vec<Option<(usize, usize)>>> = (0..num_users)
        .map(|j| {
            let mut lookup = vec![None; mn];
            for t in 0..per_user {
                for (i, &r) in codebook.support(j).iter().enumerate() {
                    let (l, kk) = entry_position(grid, k, scheme, t, r);
                    lookup[kk * grid.m + l] = Some((j * per_user + t, i));
                }
            }
            lookup
        })
        .collect();

    let mut rows = Vec::with_capacity(mn);
    for row in 0..mn {
        let mut entries: Vec<(usize, usize, Complex64)> = Vec::new();
        for (j, h) in matrices.iter().enumerate() {
            let amp = powers[j].sqrt();
            for (col, v) in h.row(row) {
                if let Some((c, i)) = lookups[j][col] {
                    entries.push((c, i, v * amp));
                }
            }
        }
        entries.sort_by_key(|&(c, i, _)| (c, i));
        let mut grouped: Vec<(usize, Vec<Complex64>)> = Vec::new();
        for (c, i, v) in entries {
            match grouped.last_mut() {
                Some((last, hb)) if *last == c => hb[i] += v,
                _ => {
                    let mut hb = vec![Complex64::new(0.0, 0.0); d];
                    hb[i] = v;
                    grouped.push((c, hb));
                }
            }
        }
        rows.push(grouped);
    }
    let mut sys = ReducedSystem::from_rows(y.to_vec(), rows, noise_var, layout, d)?;
    sys.csi_paths = csi_paths;
    Ok(sys)
}
