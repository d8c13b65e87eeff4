//! Link-level toolkit for uplink OTFS-modulated SCMA received by two
//! coordinated remote radio heads (RRHs).
//!
//! The crate covers the whole chain:
//!
//! - [`codebook`]: SCMA codebooks, bit mapping and delay-Doppler allocation.
//! - [`modem`]: OTFS modulation with rectangular pulses (ISFFT, Heisenberg,
//!   cyclic prefix, Wigner, SFFT).
//! - [`channel`]: highway geometry, pathloss, Jakes Doppler, raised-cosine
//!   taps, the time-domain channel and the exact delay-Doppler matrix.
//! - [`detectors`]: grouped sparse system, centralized and decentralized
//!   Gaussian-approximation expectation-propagation (GAEP) detectors,
//!   single-user ML and fronthaul overhead accounting.
//! - [`analysis`]: pairwise error probability and the ABER union bound.
//! - [`simulator`]: Monte Carlo sweeps and CSV reports.
//!
//! Trials are evaluated in parallel with rayon when the `parallel` feature is
//! enabled (the default); otherwise every loop runs sequentially. Results are
//! identical in both modes.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod channel;
pub mod codebook;
pub mod detectors;
mod error;
pub mod exec;
pub mod modem;
pub mod rng;
pub mod simulator;
pub mod sparse;

pub use error::{Error, Result};

pub use num_complex::Complex64;
