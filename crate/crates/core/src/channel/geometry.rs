use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Propagation speed used for Doppler; 300 km/h at 4 GHz gives 1111 Hz.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Highway segment between two RRHs at `(0, 0)` and `(d_h, 0)`. Lanes span
/// `d_p ≤ y ≤ d_p + d_w`. Distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HighwayLayout {
    pub d_h: f64,
    pub d_p: f64,
    pub d_w: f64,
    /// Spacing of the co-located sites, which sit at `x = 0, s, 2s, …`.
    pub colocated_spacing: f64,
}

impl Default for HighwayLayout {
    fn default() -> Self {
        HighwayLayout { d_h: 1000.0, d_p: 150.0, d_w: 50.0, colocated_spacing: 2000.0 }
    }
}

impl HighwayLayout {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_h > 0.0 && self.d_p > 0.0 && self.d_w > 0.0 && self.colocated_spacing > 0.0) {
            return Err(invalid("all layout distances must be positive"));
        }
        Ok(())
    }

    /// The RRH the users drive away from.
    pub fn behind_rrh(&self) -> Point {
        Point::new(0.0, 0.0)
    }

    /// The RRH the users drive toward.
    pub fn ahead_rrh(&self) -> Point {
        Point::new(self.d_h, 0.0)
    }

    /// Draws a position uniformly over the lanes.
    pub fn sample_position<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(rng.random::<f64>() * self.d_h, self.d_p + rng.random::<f64>() * self.d_w)
    }

    pub fn contains(&self, user: &UserGeometry) -> bool {
        let p = user.position;
        (0.0..=self.d_h).contains(&p.x) && (self.d_p..=self.d_p + self.d_w).contains(&p.y)
    }
}

/// RRH deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Scheme {
    /// Two distributed RRHs at both ends of the segment, jointly serving every user.
    #[default]
    #[serde(rename = "coMP", alias = "comp")]
    Comp,
    /// Both receive chains co-located at the nearest co-located site.
    #[serde(rename = "colocated")]
    Colocated,
    /// Distributed RRHs, each user served by its nearest one only.
    #[serde(rename = "cellular")]
    Cellular,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Comp => "coMP",
            Scheme::Colocated => "colocated",
            Scheme::Cellular => "cellular",
        }
    }

    /// Receive sites whose observations carry the user's signal.
    pub fn serving_sites(&self, layout: &HighwayLayout, user: &Point) -> Vec<Point> {
        match self {
            Scheme::Comp => vec![layout.behind_rrh(), layout.ahead_rrh()],
            Scheme::Colocated => {
                let s = layout.colocated_spacing;
                let site = Point::new(((user.x / s) - 0.5).ceil().max(0.0) * s, 0.0);
                vec![site, site]
            }
            Scheme::Cellular => vec![nearest(user, &[layout.behind_rrh(), layout.ahead_rrh()])],
        }
    }

    /// Receiver sites of the deployment, one per detection unit.
    pub fn receiver_sites(&self, layout: &HighwayLayout) -> Vec<Point> {
        match self {
            Scheme::Comp | Scheme::Cellular => vec![layout.behind_rrh(), layout.ahead_rrh()],
            Scheme::Colocated => vec![layout.behind_rrh(), layout.behind_rrh()],
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "comp" => Ok(Scheme::Comp),
            "colocated" => Ok(Scheme::Colocated),
            "cellular" => Ok(Scheme::Cellular),
            other => Err(invalid(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Index of the site closest to `p`; ties go to the first.
pub fn nearest_index(p: &Point, sites: &[Point]) -> usize {
    sites
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, s)| {
            let d = p.distance(s);
            if d < best.1 {
                (i, d)
            } else {
                best
            }
        })
        .0
}

fn nearest(p: &Point, sites: &[Point]) -> Point {
    sites[nearest_index(p, sites)]
}

/// A user on the highway, heading along +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserGeometry {
    pub position: Point,
    pub velocity_kmh: f64,
}

impl UserGeometry {
    /// True when the user is moving toward `rrh`, i.e. the RRH is ahead.
    pub fn moving_toward(&self, rrh: &Point) -> bool {
        rrh.x >= self.position.x
    }
}

/// Pathloss in dB for a distance in kilometers.
pub fn pathloss_db(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) || !d_km.is_finite() {
        return Err(invalid(format!("distance {d_km} km must be positive")));
    }
    Ok(142.1 + 37.6 * d_km.log10())
}

/// Linear power gain `10^(−PL/10)`.
pub fn pathloss_gain(d_km: f64) -> Result<f64> {
    Ok(10f64.powf(-pathloss_db(d_km)? / 10.0))
}

/// Converts dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Thermal noise power in watts over `bandwidth_hz` for a PSD in dBm/Hz.
pub fn noise_power_watts(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    dbm_to_watts(psd_dbm_hz + 10.0 * bandwidth_hz.log10())
}

/// Maximum Doppler shift in Hz.
pub fn max_doppler_hz(velocity_kmh: f64, carrier_hz: f64) -> f64 {
    velocity_kmh / 3.6 / SPEED_OF_LIGHT * carrier_hz
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_sites() {
        let layout = HighwayLayout::default();
        let near_end = Point::new(900.0, 160.0);
        assert_eq!(Scheme::Comp.serving_sites(&layout, &near_end).len(), 2);
        assert_eq!(Scheme::Colocated.serving_sites(&layout, &near_end), vec![Point::new(0.0, 0.0); 2]);
        assert_eq!(Scheme::Cellular.serving_sites(&layout, &near_end), vec![Point::new(1000.0, 0.0)]);
        assert_eq!(Scheme::Cellular.serving_sites(&layout, &Point::new(500.0, 160.0)), vec![Point::new(0.0, 0.0)]);
        assert_eq!("coMP".parse::<Scheme>().unwrap(), Scheme::Comp);
        assert_eq!(serde_json::to_string(&Scheme::Comp).unwrap(), "\"coMP\"");
    }

    #[test]
    fn link_budget() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        // −174 dBm/Hz over 960 kHz is about −114.18 dBm.
        let n = noise_power_watts(-174.0, 960e3);
        assert!((10.0 * (n * 1e3).log10() + 114.177).abs() < 1e-3);
    }

    #[test]
    fn pathloss_examples() {
        assert!((pathloss_db(1.0).unwrap() - 142.1).abs() < 1e-12);
        assert!((pathloss_db(0.1).unwrap() - 104.5).abs() < 1e-12);
        // 142.1 + 37.6·log10(0.5) = 142.1 − 11.3186...
        assert!((pathloss_db(0.5).unwrap() - 130.781272).abs() < 1e-6);
        assert!(pathloss_db(0.0).is_err());
        assert!(pathloss_db(-1.0).is_err());
        assert!((pathloss_gain(1.0).unwrap() - 10f64.powf(-14.21)).abs() < 1e-25);
    }

    #[test]
    fn doppler_at_highway_speed() {
        assert!((max_doppler_hz(300.0, 4e9) - 1111.11).abs() < 0.01);
    }

    #[test]
    fn midpoint_distance() {
        let layout = HighwayLayout::default();
        let user = UserGeometry { position: Point::new(500.0, 150.0), velocity_kmh: 300.0 };
        let d = user.position.distance(&layout.behind_rrh());
        assert!((d - 522.0153).abs() < 1e-4);
        assert_eq!(d, user.position.distance(&layout.ahead_rrh()));
        assert!(layout.contains(&user));
        assert!(user.moving_toward(&layout.ahead_rrh()));
        assert!(!user.moving_toward(&layout.behind_rrh()));
    }
}
