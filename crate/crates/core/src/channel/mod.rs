//! Doubly-selective channel: geometry and pathloss, path generation, the
//! sample-level time-domain channel and its exact delay-Doppler matrix.

mod dd_matrix;
mod geometry;
mod model;
mod pulse;
mod time_domain;

pub use dd_matrix::{build_dd_matrix, dd_gain, theta, DelayDopplerMatrix};
pub use geometry::{
    dbm_to_watts, max_doppler_hz, nearest_index, noise_power_watts, pathloss_db, pathloss_gain, HighwayLayout, Point,
    Scheme, UserGeometry, SPEED_OF_LIGHT,
};
pub use model::{
    generate_channel, jakes_doppler, perturb_csi, split_doppler, ChannelProfile, MultipathChannel, Path, ProfileMode,
    PULSE_THRESHOLD,
};
pub use pulse::rc_pulse;
pub use time_domain::{apply_time_domain, tap_gain};
