//! OTFS modulation and demodulation with rectangular pulses.
//!
//! Frames are `M × N` matrices indexed `[delay, doppler]` in the
//! delay-Doppler domain and `[subcarrier, symbol]` in the time-frequency
//! domain. All DFTs are unitary. Vectorization is column-major, so entry
//! `(ℓ, k)` sits at index `k·M + ℓ`, and the time-domain payload sample of
//! subcarrier block `n`, position `m'` is `n·M + m'`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Delay-Doppler grid geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtfsGrid {
    /// Subcarriers (delay bins).
    pub m: usize,
    /// Time slots (Doppler bins).
    pub n: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Cyclic prefix length in samples.
    pub cp_len: usize,
}

impl OtfsGrid {
    pub fn new(m: usize, n: usize, delta_f: f64, cp_len: usize) -> Result<Self> {
        let grid = OtfsGrid { m, n, delta_f, cp_len };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(invalid("grid dimensions must be positive"));
        }
        if !(self.delta_f.is_finite() && self.delta_f > 0.0) {
            return Err(invalid("subcarrier spacing must be positive"));
        }
        if self.cp_len > self.m * self.n {
            return Err(invalid(format!("cp_len {} exceeds frame length {}", self.cp_len, self.m * self.n)));
        }
        Ok(())
    }

    /// Symbol duration T = 1/Δf.
    pub fn symbol_time(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Sampling interval Ts = 1/(MΔf).
    pub fn sample_time(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f)
    }

    /// Frame duration N·T; the Doppler resolution is its inverse.
    pub fn frame_time(&self) -> f64 {
        self.n as f64 / self.delta_f
    }

    pub fn bandwidth(&self) -> f64 {
        self.m as f64 * self.delta_f
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Time-domain samples, optionally prefixed by a cyclic prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainSignal {
    /// CP followed by the payload.
    pub samples: Vec<Complex64>,
    pub cp_len: usize,
}

impl TimeDomainSignal {
    pub fn from_payload(payload: Vec<Complex64>) -> Self {
        TimeDomainSignal { samples: payload, cp_len: 0 }
    }

    pub fn payload(&self) -> &[Complex64] {
        &self.samples[self.cp_len..]
    }

    pub fn energy(&self) -> f64 {
        self.payload().iter().map(|v| v.norm_sqr()).sum()
    }
}

fn plan(len: usize, direction: FftDirection) -> std::sync::Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft(len, direction)
}

/// Unitary DFT of every column in place.
fn columns_dft(x: &mut DMatrix<Complex64>, direction: FftDirection) {
    let m = x.nrows();
    let fft = plan(m, direction);
    let scale = 1.0 / (m as f64).sqrt();
    // Storage is column-major, so each column is a contiguous chunk.
    for col in x.as_mut_slice().chunks_exact_mut(m) {
        fft.process(col);
        col.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Unitary DFT of every row in place.
fn rows_dft(x: &mut DMatrix<Complex64>, direction: FftDirection) {
    let n = x.ncols();
    let fft = plan(n, direction);
    let scale = 1.0 / (n as f64).sqrt();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..x.nrows() {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = x[(r, c)];
        }
        fft.process(&mut buf);
        for (c, b) in buf.iter().enumerate() {
            x[(r, c)] = *b * scale;
        }
    }
}

/// ISFFT: `F_M · X · F_Nᴴ`.
pub fn isfft(x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = x.clone();
    columns_dft(&mut out, FftDirection::Forward);
    rows_dft(&mut out, FftDirection::Inverse);
    out
}

/// SFFT: `F_Mᴴ · Ȳ · F_N`.
pub fn sfft(y: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = y.clone();
    columns_dft(&mut out, FftDirection::Inverse);
    rows_dft(&mut out, FftDirection::Forward);
    out
}

/// Heisenberg transform with a rectangular pulse: an M-point inverse DFT
/// per time slot, serialized slot after slot.
pub fn heisenberg(x_tf: &DMatrix<Complex64>, grid: &OtfsGrid) -> Result<TimeDomainSignal> {
    check_shape(x_tf, grid)?;
    let mut blocks = x_tf.clone();
    columns_dft(&mut blocks, FftDirection::Inverse);
    Ok(TimeDomainSignal::from_payload(blocks.as_slice().to_vec()))
}

/// Wigner transform with a rectangular pulse: an M-point DFT per block of
/// the payload.
pub fn wigner(r: &TimeDomainSignal, grid: &OtfsGrid) -> Result<DMatrix<Complex64>> {
    let payload = r.payload();
    if payload.len() != grid.len() {
        return Err(invalid(format!("payload has {} samples, expected {}", payload.len(), grid.len())));
    }
    let mut y = DMatrix::from_column_slice(grid.m, grid.n, payload);
    columns_dft(&mut y, FftDirection::Forward);
    Ok(y)
}

/// Prepends the last `cp_len` payload samples.
pub fn add_cp(s: &TimeDomainSignal, cp_len: usize) -> Result<TimeDomainSignal> {
    let payload = s.payload();
    if cp_len > payload.len() {
        return Err(invalid(format!("cp_len {cp_len} exceeds payload length {}", payload.len())));
    }
    let mut samples = Vec::with_capacity(payload.len() + cp_len);
    samples.extend_from_slice(&payload[payload.len() - cp_len..]);
    samples.extend_from_slice(payload);
    Ok(TimeDomainSignal { samples, cp_len })
}

pub fn remove_cp(r: &TimeDomainSignal) -> TimeDomainSignal {
    TimeDomainSignal::from_payload(r.payload().to_vec())
}

/// ISFFT, Heisenberg transform and cyclic prefix.
pub fn modulate(x: &DMatrix<Complex64>, grid: &OtfsGrid) -> Result<TimeDomainSignal> {
    check_shape(x, grid)?;
    add_cp(&heisenberg(&isfft(x), grid)?, grid.cp_len)
}

/// CP removal, Wigner transform and SFFT.
pub fn demodulate(r: &TimeDomainSignal, grid: &OtfsGrid) -> Result<DMatrix<Complex64>> {
    Ok(sfft(&wigner(&remove_cp(r), grid)?))
}

fn check_shape(x: &DMatrix<Complex64>, grid: &OtfsGrid) -> Result<()> {
    if x.shape() != (grid.m, grid.n) {
        return Err(invalid(format!("frame is {:?}, grid is {}×{}", x.shape(), grid.m, grid.n)));
    }
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(invalid("frame has non-finite entries"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(m: usize, n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
        DMatrix::from_fn(m, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn energy(x: &DMatrix<Complex64>) -> f64 {
        x.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Dense normalized DFT matrix, written out from its definition.
    fn dft_matrix(n: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(n, n, |k, l| {
            Complex64::from_polar(1.0 / (n as f64).sqrt(), -2.0 * std::f64::consts::PI * (k * l) as f64 / n as f64)
        })
    }

    #[test]
    fn isfft_matches_matrix_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_frame(4, 2, &mut rng);
        let expected = dft_matrix(4) * &x * dft_matrix(2).adjoint();
        assert!((isfft(&x) - expected).norm() < 1e-12);
        let y = random_frame(4, 2, &mut rng);
        let expected = dft_matrix(4).adjoint() * &y * dft_matrix(2);
        assert!((sfft(&y) - expected).norm() < 1e-12);
    }

    #[test]
    fn trivial_cases() {
        let zero = DMatrix::zeros(4, 2);
        assert_eq!(isfft(&zero), zero);
        assert_eq!(sfft(&zero), zero);
        let one = DMatrix::from_element(1, 1, Complex64::new(0.3, -0.7));
        assert_eq!(isfft(&one), one);
        assert_eq!(sfft(&one), one);
    }

    #[test]
    fn heisenberg_single_entry() {
        let grid = OtfsGrid::new(4, 2, 15e3, 0).unwrap();
        let mut x = DMatrix::zeros(4, 2);
        x[(0, 0)] = Complex64::new(1.0, 0.0);
        let s = heisenberg(&x, &grid).unwrap();
        for (c, v) in s.payload().iter().enumerate() {
            let expected = if c < 4 { 0.5 } else { 0.0 };
            assert!((v - Complex64::new(expected, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn heisenberg_matches_pulse_sum() {
        // s[c] = Σ_n Σ_m X̄[m,n] g(cTs − nT) e^{j2πmΔf(cTs − nT)}, rectangular g on [0, T)
        // scaled by 1/√M so the transform is unitary.
        let grid = OtfsGrid::new(4, 3, 15e3, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_frame(4, 3, &mut rng);
        let s = heisenberg(&x, &grid).unwrap();
        let (ts, t) = (grid.sample_time(), grid.symbol_time());
        for c in 0..12 {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..3 {
                let tau = c as f64 * ts - n as f64 * t;
                if tau < -1e-15 || tau >= t - 1e-15 {
                    continue;
                }
                for m in 0..4 {
                    let phase = 2.0 * std::f64::consts::PI * m as f64 * grid.delta_f * tau;
                    acc += x[(m, n)] * Complex64::from_polar(0.5, phase);
                }
            }
            assert!((acc - s.payload()[c]).norm() < 1e-12);
        }
    }

    #[test]
    fn wigner_of_impulse_is_flat() {
        let grid = OtfsGrid::new(4, 2, 15e3, 0).unwrap();
        let mut r = vec![Complex64::new(0.0, 0.0); 8];
        r[0] = Complex64::new(1.0, 0.0);
        let y = wigner(&TimeDomainSignal::from_payload(r), &grid).unwrap();
        for m in 0..4 {
            assert!((y[(m, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
            assert!(y[(m, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn cyclic_prefix() {
        let s = TimeDomainSignal::from_payload((0..8).map(|i| Complex64::new(i as f64, 0.0)).collect());
        assert_eq!(add_cp(&s, 0).unwrap(), s);
        let with_cp = add_cp(&s, 2).unwrap();
        assert_eq!(&with_cp.samples[..2], &[Complex64::new(6.0, 0.0), Complex64::new(7.0, 0.0)]);
        assert_eq!(remove_cp(&with_cp), s);
        assert!(add_cp(&s, 9).is_err());
    }

    #[test]
    fn loopback_64x16() {
        let grid = OtfsGrid::new(64, 16, 15e3, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_frame(64, 16, &mut rng);
        let s = modulate(&x, &grid).unwrap();
        assert_eq!(s.samples.len(), 64 * 16 + 12);
        assert!((demodulate(&s, &grid).unwrap() - &x).norm() < 1e-10);
        assert!((s.energy() - energy(&x)).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let grid = OtfsGrid::new(4, 2, 15e3, 0).unwrap();
        assert!(modulate(&DMatrix::zeros(2, 4), &grid).is_err());
        assert!(OtfsGrid::new(4, 2, 15e3, 9).is_err());
    }

    proptest! {
        #[test]
        fn transforms_are_unitary(seed in any::<u64>(), m in 1usize..9, n in 1usize..9, cp in 0usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_frame(m, n, &mut rng);
            let e = energy(&x);
            prop_assert!((energy(&isfft(&x)) - e).abs() < 1e-12 * e.max(1.0));
            prop_assert!((sfft(&isfft(&x)) - &x).norm() < 1e-12);
            let grid = OtfsGrid::new(m, n, 15e3, cp.min(m * n)).unwrap();
            let tf = isfft(&x);
            prop_assert!((wigner(&heisenberg(&tf, &grid).unwrap(), &grid).unwrap() - &tf).norm() < 1e-12);
            prop_assert!((demodulate(&modulate(&x, &grid).unwrap(), &grid).unwrap() - &x).norm() < 1e-10);
        }
    }
}
