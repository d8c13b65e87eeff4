use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::GainConvention;
use crate::channel::{ChannelProfile, HighwayLayout, Scheme};
use crate::codebook::{AllocationScheme, ScmaCodebook};
use crate::detectors::DetectorConfig;
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::modem::OtfsGrid;

/// Pathloss applied to every channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathlossMode {
    /// From each user's sampled distance.
    #[default]
    Geometry,
    /// Mean linear pathloss of the receive branch over the user distribution,
    /// as assumed by the union bound.
    Mean,
}

/// Which users transmit in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActiveUsers {
    #[default]
    All,
    /// One user per trial, cycling through the codebook's users.
    Single,
}

/// Union-bound settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConfig {
    pub channel_draws: usize,
    pub pathloss_samples: usize,
    pub gain_convention: GainConvention,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig { channel_draws: 100, pathloss_samples: 100_000, gain_convention: GainConvention::Iid }
    }
}

/// Full simulation setup, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub grid: OtfsGrid,
    pub carrier_hz: f64,
    /// Codebook JSON file; the built-in six-user codebook when absent.
    /// Relative paths resolve against the config file's directory.
    pub codebook: Option<PathBuf>,
    pub scheme: Scheme,
    pub layout: HighwayLayout,
    pub profile: ChannelProfile,
    pub velocity_kmh: f64,
    /// Per-user transmit power sweep in dBm.
    pub powers_dbm: Vec<f64>,
    pub noise_psd_dbm_hz: f64,
    pub detector: DetectorConfig,
    /// Relative CSI error bound; zero means perfect CSI.
    pub csi_epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub allocation: AllocationScheme,
    pub pathloss_mode: PathlossMode,
    pub active_users: ActiveUsers,
    pub execution: Execution,
    pub bound: BoundConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            grid: OtfsGrid { m: 64, n: 16, delta_f: 15e3, cp_len: 16 },
            carrier_hz: 4e9,
            codebook: None,
            scheme: Scheme::Comp,
            layout: HighwayLayout::default(),
            profile: ChannelProfile::default(),
            velocity_kmh: 300.0,
            powers_dbm: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            noise_psd_dbm_hz: -174.0,
            detector: DetectorConfig::default(),
            csi_epsilon: 0.0,
            trials: 1000,
            seed: 1,
            allocation: AllocationScheme::Delay,
            pathloss_mode: PathlossMode::Geometry,
            active_users: ActiveUsers::All,
            execution: Execution::Parallel,
            bound: BoundConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: SimulationConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves a relative codebook path.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json_str(&std::fs::read_to_string(path)?)?;
        if let (Some(cb), Some(dir)) = (&cfg.codebook, path.parent()) {
            if cb.is_relative() {
                cfg.codebook = Some(dir.join(cb));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.layout.validate()?;
        self.profile.validate()?;
        self.detector.validate()?;
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.powers_dbm.is_empty() || self.powers_dbm.iter().any(|p| !p.is_finite()) {
            return Err(invalid("power sweep must be non-empty and finite"));
        }
        if !(self.csi_epsilon >= 0.0 && self.csi_epsilon < 1.0) {
            return Err(invalid("csi_epsilon must lie in [0, 1)"));
        }
        if !(self.carrier_hz > 0.0) || !(self.velocity_kmh >= 0.0) {
            return Err(invalid("carrier must be positive and velocity non-negative"));
        }
        if self.scheme == Scheme::Colocated && self.layout.colocated_spacing < 2.0 * self.layout.d_h {
            return Err(invalid("co-located sites closer than 2·d_h would split users across sites"));
        }
        Ok(())
    }

    pub fn load_codebook(&self) -> Result<ScmaCodebook> {
        match &self.codebook {
            Some(path) => ScmaCodebook::load(path),
            None => Ok(ScmaCodebook::default_j6()),
        }
    }
}
