//! SCMA codebooks, bit mapping and placement of codewords on the
//! delay-Doppler grid.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::modem::OtfsGrid;

/// Codebook shipped with the crate: 6 users, 4 resources, 2 non-zeros, 4 codewords.
pub const DEFAULT_CODEBOOK_JSON: &str = include_str!("../data/codebook_j6_k4_d2_q4.json");

/// Per-user SCMA codebooks with a regular sparse resource mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmaCodebook {
    num_users: usize,
    num_resources: usize,
    num_nonzero: usize,
    size: usize,
    /// `codewords[j][q]` is the K-dimensional codeword `q` of user `j`.
    codewords: Vec<Vec<Vec<Complex64>>>,
    /// Sorted resource indices carrying user `j`'s non-zero entries.
    support: Vec<Vec<usize>>,
    /// `compact[j][q]` holds only the D non-zero entries, in support order.
    compact: Vec<Vec<Vec<Complex64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CodebookFile {
    #[serde(rename = "J")]
    j: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "Q")]
    q: usize,
    codewords: Vec<Vec<Vec<[f64; 2]>>>,
}

impl ScmaCodebook {
    /// Builds and validates a codebook from `codewords[j][q][k]`.
    pub fn new(num_nonzero: usize, codewords: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let num_users = codewords.len();
        if num_users == 0 {
            return Err(invalid("codebook has no users"));
        }
        let size = codewords[0].len();
        if size < 2 || !size.is_power_of_two() {
            return Err(invalid(format!("codebook size {size} is not a power of two ≥ 2")));
        }
        let num_resources = codewords[0].first().map_or(0, Vec::len);
        if num_nonzero == 0 || num_nonzero > num_resources {
            return Err(invalid(format!("D = {num_nonzero} incompatible with K = {num_resources}")));
        }

        let mut support = Vec::with_capacity(num_users);
        for (j, user) in codewords.iter().enumerate() {
            if user.len() != size {
                return Err(invalid(format!("user {j} has {} codewords, expected {size}", user.len())));
            }
            let mut user_support: Option<Vec<usize>> = None;
            for (q, cw) in user.iter().enumerate() {
                if cw.len() != num_resources {
                    return Err(invalid(format!("codeword ({j},{q}) has length {}", cw.len())));
                }
                if cw.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(invalid(format!("codeword ({j},{q}) is not finite")));
                }
                let nz: Vec<usize> = (0..num_resources).filter(|&k| cw[k].norm_sqr() > 0.0).collect();
                if nz.len() != num_nonzero {
                    return Err(invalid(format!(
                        "codeword ({j},{q}) has {} non-zeros, expected {num_nonzero}",
                        nz.len()
                    )));
                }
                match &user_support {
                    None => user_support = Some(nz),
                    Some(s) if *s != nz => {
                        return Err(invalid(format!("codeword ({j},{q}) leaves user {j}'s support")))
                    }
                    _ => {}
                }
            }
            for a in 0..size {
                for b in a + 1..size {
                    if user[a] == user[b] {
                        return Err(invalid(format!("user {j} codewords {a} and {b} coincide")));
                    }
                }
            }
            support.push(user_support.unwrap_or_default());
        }

        if !(num_users * num_nonzero).is_multiple_of(num_resources) {
            return Err(invalid("J·D is not a multiple of K; mapping cannot be regular"));
        }
        let degree = num_users * num_nonzero / num_resources;
        for k in 0..num_resources {
            let load = support.iter().filter(|s| s.contains(&k)).count();
            if load != degree {
                return Err(invalid(format!("resource {k} carries {load} users, expected {degree}")));
            }
        }

        let total: f64 = codewords.iter().flatten().flatten().map(|v| v.norm_sqr()).sum();
        let mean_energy = total / (num_users * size) as f64;
        if (mean_energy - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("average codeword energy is {mean_energy}, expected 1")));
        }

        let compact = codewords
            .iter()
            .zip(&support)
            .map(|(user, s)| user.iter().map(|cw| s.iter().map(|&k| cw[k]).collect()).collect())
            .collect();
        Ok(ScmaCodebook { num_users, num_resources, num_nonzero, size, codewords, support, compact })
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: CodebookFile = serde_json::from_str(s)?;
        let codewords: Vec<Vec<Vec<Complex64>>> = file
            .codewords
            .iter()
            .map(|u| u.iter().map(|cw| cw.iter().map(|&[re, im]| Complex64::new(re, im)).collect()).collect())
            .collect();
        let cb = Self::new(file.d, codewords)?;
        if cb.num_users != file.j || cb.num_resources != file.k || cb.size != file.q {
            return Err(invalid(format!(
                "header J={} K={} Q={} disagrees with data J={} K={} Q={}",
                file.j, file.k, file.q, cb.num_users, cb.num_resources, cb.size
            )));
        }
        Ok(cb)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// The bundled J=6, K=4, D=2, Q=4 codebook.
    pub fn default_j6() -> Self {
        Self::from_json_str(DEFAULT_CODEBOOK_JSON).expect("bundled codebook is valid")
    }

    pub fn to_json_string(&self) -> String {
        let file = CodebookFile {
            j: self.num_users,
            k: self.num_resources,
            d: self.num_nonzero,
            q: self.size,
            codewords: self
                .codewords
                .iter()
                .map(|u| u.iter().map(|cw| cw.iter().map(|v| [v.re, v.im]).collect()).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("codebook serializes")
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_resources(&self) -> usize {
        self.num_resources
    }

    pub fn num_nonzero(&self) -> usize {
        self.num_nonzero
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bits_per_codeword(&self) -> usize {
        self.size.trailing_zeros() as usize
    }

    /// Overloading factor J/K.
    pub fn overloading(&self) -> f64 {
        self.num_users as f64 / self.num_resources as f64
    }

    pub fn codeword(&self, user: usize, index: usize) -> &[Complex64] {
        &self.codewords[user][index]
    }

    /// The D non-zero entries of a codeword, in support order.
    pub fn nonzero(&self, user: usize, index: usize) -> &[Complex64] {
        &self.compact[user][index]
    }

    pub fn support(&self, user: usize) -> &[usize] {
        &self.support[user]
    }

    /// Mean energy of one non-zero codeword entry.
    pub fn mean_entry_energy(&self) -> f64 {
        1.0 / self.num_nonzero as f64
    }

    /// Restricts the codebook to a subset of users. The result is validated
    /// without the regular-mapping check, which a subset generally breaks.
    pub fn subset(&self, users: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.codewords = users.iter().map(|&j| self.codewords[j].clone()).collect();
        out.support = users.iter().map(|&j| self.support[j].clone()).collect();
        out.compact = users.iter().map(|&j| self.compact[j].clone()).collect();
        out.num_users = users.len();
        if users.iter().any(|&j| j >= self.num_users) {
            return Err(invalid("subset user out of range"));
        }
        Ok(out)
    }
}

/// Axis along which consecutive codeword entries are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationScheme {
    /// K consecutive delay bins of one Doppler column; blocks fill column-major.
    #[default]
    Delay,
    /// K consecutive Doppler bins of one delay row; blocks fill row-major.
    Doppler,
}

/// Number of codewords one user places in a frame, checking divisibility.
pub fn codewords_per_frame(grid: &OtfsGrid, k: usize, scheme: AllocationScheme) -> Result<usize> {
    let axis = match scheme {
        AllocationScheme::Delay => grid.m,
        AllocationScheme::Doppler => grid.n,
    };
    if k == 0 || axis % k != 0 {
        return Err(invalid(format!("{scheme:?} axis of length {axis} is not divisible by K = {k}")));
    }
    Ok(grid.m * grid.n / k)
}

/// Grid position `(delay, doppler)` of entry `r` of codeword `t`.
pub fn entry_position(grid: &OtfsGrid, k: usize, scheme: AllocationScheme, t: usize, r: usize) -> (usize, usize) {
    match scheme {
        AllocationScheme::Delay => {
            let per_col = grid.m / k;
            (k * (t % per_col) + r, t / per_col)
        }
        AllocationScheme::Doppler => {
            let per_row = grid.n / k;
            (t / per_row, k * (t % per_row) + r)
        }
    }
}

/// Maps bits to codeword indices, `log2 Q` bits per index, MSB first.
pub fn map_bits(bits: &[u8], codebook: &ScmaCodebook, user: usize) -> Result<Vec<usize>> {
    if user >= codebook.num_users() {
        return Err(invalid(format!("user {user} out of range")));
    }
    let width = codebook.bits_per_codeword();
    if !bits.len().is_multiple_of(width) {
        return Err(invalid(format!("{} bits is not a multiple of {width}", bits.len())));
    }
    bits.chunks(width)
        .map(|group| {
            group.iter().try_fold(0usize, |acc, &b| match b {
                0 | 1 => Ok((acc << 1) | b as usize),
                _ => Err(invalid(format!("bit value {b} is not 0 or 1"))),
            })
        })
        .collect()
}

/// Inverse of [`map_bits`].
pub fn demap(indices: &[usize], q: usize) -> Result<Vec<u8>> {
    if q < 2 || !q.is_power_of_two() {
        return Err(invalid(format!("Q = {q} is not a power of two")));
    }
    let width = q.trailing_zeros() as usize;
    let mut bits = Vec::with_capacity(indices.len() * width);
    for &idx in indices {
        if idx >= q {
            return Err(invalid(format!("codeword index {idx} ≥ Q = {q}")));
        }
        bits.extend((0..width).rev().map(|b| ((idx >> b) & 1) as u8));
    }
    Ok(bits)
}

/// Places a user's codeword sequence on an M×N delay-Doppler frame.
pub fn allocate(
    indices: &[usize],
    codebook: &ScmaCodebook,
    grid: &OtfsGrid,
    scheme: AllocationScheme,
    user: usize,
) -> Result<DMatrix<Complex64>> {
    let k = codebook.num_resources();
    let count = codewords_per_frame(grid, k, scheme)?;
    if indices.len() != count {
        return Err(invalid(format!("expected {count} codeword indices, got {}", indices.len())));
    }
    if user >= codebook.num_users() {
        return Err(invalid(format!("user {user} out of range")));
    }
    let mut frame = DMatrix::zeros(grid.m, grid.n);
    for (t, &q) in indices.iter().enumerate() {
        if q >= codebook.size() {
            return Err(invalid(format!("codeword index {q} ≥ Q")));
        }
        for (r, &v) in codebook.codeword(user, q).iter().enumerate() {
            frame[entry_position(grid, k, scheme, t, r)] = v;
        }
    }
    Ok(frame)
}

/// Reads the K-bins of every codeword back out of a frame.
pub fn deallocate(
    frame: &DMatrix<Complex64>,
    k: usize,
    grid: &OtfsGrid,
    scheme: AllocationScheme,
) -> Result<Vec<Vec<Complex64>>> {
    let count = codewords_per_frame(grid, k, scheme)?;
    if frame.shape() != (grid.m, grid.n) {
        return Err(invalid("frame shape does not match grid"));
    }
    Ok((0..count).map(|t| (0..k).map(|r| frame[entry_position(grid, k, scheme, t, r)]).collect()).collect())
}
