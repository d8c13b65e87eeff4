use std::f64::consts::PI;

use num_complex::Complex64;

use super::model::MultipathChannel;
use crate::modem::OtfsGrid;
use crate::sparse::CsrMatrix;

/// Delay-Doppler channel matrix `H` with `y = H·vec(X)` and row/column
/// index `k·M + ℓ`.
pub type DelayDopplerMatrix = CsrMatrix;

/// Inter-Doppler leakage `θ(q, β) = Σ_n e^{j2πn(q+β)/N}`.
///
/// Equals `N` at `q ≡ 0` and zero elsewhere when `β = 0`.
pub fn theta(q: usize, beta: f64, n: usize) -> Complex64 {
    if beta == 0.0 {
        return if q.is_multiple_of(n) { Complex64::new(n as f64, 0.0) } else { Complex64::new(0.0, 0.0) };
    }
    // e^{j2π(q+β)} = e^{j2πβ} for integer q.
    let num = Complex64::from_polar(1.0, 2.0 * PI * beta) - 1.0;
    let den = Complex64::from_polar(1.0, 2.0 * PI * (q as f64 + beta) / n as f64) - 1.0;
    num / den
}

/// Gain linking input bin `([ℓ−p]_M, [k − k_i + q]_N)` to output `(ℓ, k)`
/// through tap `p` of a path with Doppler `(k_i, β_i)`:
/// `(1/N)·ξ·θ·φ^b`, where `b` counts how many slots the tap reaches back
/// (`b = 1` for `ℓ < p ≤ M`), and `φ = e^{−j2π[k−k_i+q]_N/N}`.
pub fn dd_gain(grid: &OtfsGrid, l: usize, k: usize, p: usize, q: usize, k_i: i64, beta: f64) -> Complex64 {
    let (m, n) = (grid.m as i64, grid.n as i64);
    let shift = l as i64 - p as i64;
    let xi = Complex64::from_polar(1.0, 2.0 * PI * (shift as f64 / m as f64) * ((k_i as f64 + beta) / n as f64));
    let th = theta(q, beta, grid.n);
    let back = -shift.div_euclid(m);
    let col_doppler = (k as i64 - k_i + q as i64).rem_euclid(n);
    let phi = Complex64::from_polar(1.0, -2.0 * PI * (back * col_doppler) as f64 / n as f64);
    xi * th * phi / n as f64
}

/// Builds the exact delay-Doppler matrix of `ch` for rectangular pulses,
/// including the pathloss amplitude.
pub fn build_dd_matrix(ch: &MultipathChannel, grid: &OtfsGrid) -> DelayDopplerMatrix {
    let (m, n) = (grid.m, grid.n);
    let ts = grid.sample_time();
    let weights = ch.tap_weights(ts);
    let amp = ch.amplitude();
    // Leakage per path and q, shared by every row.
    let thetas: Vec<Vec<Complex64>> =
        ch.paths.iter().map(|path| (0..n).map(|q| theta(q, path.doppler_frac, n)).collect()).collect();

    let rows = (0..m * n)
        .map(|row| {
            let (l, k) = (row % m, row / m);
            let mut entries = Vec::new();
            for p in 0..ch.num_taps {
                let src_delay = (l as i64 - p as i64).rem_euclid(m as i64) as usize;
                for (i, path) in ch.paths.iter().enumerate() {
                    let w = weights[i][p];
                    if w == 0.0 {
                        continue;
                    }
                    let scale = path.gain * (w * amp);
                    for q in 0..n {
                        if thetas[i][q].norm_sqr() == 0.0 {
                            continue;
                        }
                        let src_doppler = (k as i64 - path.doppler_index + q as i64).rem_euclid(n as i64) as usize;
                        let g = dd_gain(grid, l, k, p, q, path.doppler_index, path.doppler_frac);
                        entries.push((src_doppler * m + src_delay, scale * g));
                    }
                }
            }
            entries
        })
        .collect();
    CsrMatrix::from_rows(m * n, rows)
}
