//! Circular-ring constellation around a fixed ground user (UE).
//!
//! Every satellite sits on one orbit ring of radius `R + H`. The geocentric
//! angle of a satellite is measured at the Earth's centre from the UE zenith
//! ray, and the UE-satellite slant range follows from the law of cosines.
//! Satellite indices are ordered by increasing phase, so walking the ring by
//! `-1` moves toward the zenith for satellites in `(0, π]`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Default orbital period used when a config does not give one.
pub const DEFAULT_PERIOD_S: f64 = 6000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationConfig {
    pub earth_radius_km: f64,
    pub altitude_km: f64,
    /// Radians per second; zero freezes the constellation.
    pub angular_velocity: f64,
    /// A satellite is visible while its angular separation from the zenith
    /// is strictly below this value.
    pub visibility_half_angle: f64,
    /// Phase of each satellite at `t = 0`, in `[0, 2π)`.
    pub phase_offsets: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatellitePose {
    pub sat_index: usize,
    pub geocentric_angle: f64,
    pub visible: bool,
    pub distance_km: f64,
}

/// Result of walking the ring from a satellite to the nearest visible one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Migration {
    pub hops: usize,
    pub target: usize,
}

/// Slant range between the UE and a satellite at geocentric angle `gamma`.
pub fn slant_range_km(earth_radius_km: f64, altitude_km: f64, gamma: f64) -> f64 {
    let r = earth_radius_km;
    let orbit = earth_radius_km + altitude_km;
    let sq = r * r + orbit * orbit - 2.0 * r * orbit * gamma.cos();
    // At γ = 0 the expression cancels to H² up to rounding.
    sq.max(altitude_km * altitude_km).sqrt()
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Angular separation from the zenith, in `[0, π]`.
pub fn zenith_separation(gamma: f64) -> f64 {
    let g = wrap_angle(gamma);
    g.min(TAU - g)
}

impl ConstellationConfig {
    /// `count` satellites spaced evenly around the ring, starting at `base_phase`.
    pub fn uniform(
        earth_radius_km: f64,
        altitude_km: f64,
        count: usize,
        angular_velocity: f64,
        visibility_half_angle: f64,
        base_phase: f64,
    ) -> Result<Self> {
        let phase_offsets = (0..count)
            .map(|j| wrap_angle(base_phase + TAU * j as f64 / count as f64))
            .collect();
        let cfg = Self {
            earth_radius_km,
            altitude_km,
            angular_velocity,
            visibility_half_angle,
            phase_offsets,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn satellite_count(&self) -> usize {
        self.phase_offsets.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.phase_offsets.is_empty() {
            return Err(Error::config("constellation.satellite_count", "must be at least 1"));
        }
        if !(self.earth_radius_km > 0.0 && self.earth_radius_km.is_finite()) {
            return Err(Error::config("constellation.earth_radius_km", "must be positive"));
        }
        if !(self.altitude_km > 0.0 && self.altitude_km.is_finite()) {
            return Err(Error::config("constellation.altitude_km", "must be positive"));
        }
        if !self.angular_velocity.is_finite() {
            return Err(Error::config("constellation.angular_velocity", "must be finite"));
        }
        if !(self.visibility_half_angle > 0.0 && self.visibility_half_angle <= PI) {
            return Err(Error::config(
                "constellation.visibility_half_angle",
                "must lie in (0, π]",
            ));
        }
        if let Some(bad) = self.phase_offsets.iter().find(|p| !(0.0..TAU).contains(*p)) {
            return Err(Error::config(
                "constellation.phase_offsets",
                format!("{bad} is outside [0, 2π)"),
            ));
        }
        Ok(())
    }

    fn check_index(&self, sat_index: usize) -> Result<()> {
        if sat_index >= self.satellite_count() {
            return Err(Error::IndexOutOfRange {
                what: "satellites",
                index: sat_index,
                len: self.satellite_count(),
            });
        }
        Ok(())
    }

    fn angle_at(&self, sat_index: usize, t: f64) -> f64 {
        wrap_angle(self.phase_offsets[sat_index] + self.angular_velocity * t)
    }

    fn visible_angle(&self, gamma: f64) -> bool {
        zenith_separation(gamma) < self.visibility_half_angle
    }

    pub fn pose_at(&self, sat_index: usize, t: f64) -> Result<SatellitePose> {
        self.check_index(sat_index)?;
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be non-negative, got {t}")));
        }
        let gamma = self.angle_at(sat_index, t);
        Ok(SatellitePose {
            sat_index,
            geocentric_angle: gamma,
            visible: self.visible_angle(gamma),
            distance_km: slant_range_km(self.earth_radius_km, self.altitude_km, gamma),
        })
    }

    pub fn is_visible(&self, sat_index: usize, t: f64) -> Result<bool> {
        Ok(self.pose_at(sat_index, t)?.visible)
    }

    /// Walks the ring from `sat_index` until a visible satellite is found.
    ///
    /// Satellites in `(0, π]` walk toward lower indices, the rest toward
    /// higher ones. Index arithmetic wraps modulo the satellite count.
    pub fn hops_to_visible(&self, sat_index: usize, t: f64) -> Result<Migration> {
        let pose = self.pose_at(sat_index, t)?;
        if pose.visible {
            return Ok(Migration {
                hops: 0,
                target: sat_index,
            });
        }
        let count = self.satellite_count();
        let gamma = pose.geocentric_angle;
        let backwards = gamma > 0.0 && gamma <= PI;
        for hops in 1..count {
            let target = if backwards {
                (sat_index + count - hops % count) % count
            } else {
                (sat_index + hops) % count
            };
            if self.visible_angle(self.angle_at(target, t)) {
                return Ok(Migration { hops, target });
            }
        }
        Err(Error::NoVisibleSatellite { time: t })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frozen(count: usize) -> ConstellationConfig {
        ConstellationConfig::uniform(6371.0, 780.0, count, 0.0, PI / 2.0, 0.0).unwrap()
    }

    #[test]
    fn zenith_and_nadir_ranges() {
        let cfg = ConstellationConfig {
            phase_offsets: vec![0.0, PI],
            ..frozen(1)
        };
        assert_eq!(cfg.pose_at(0, 0.0).unwrap().distance_km, 780.0);
        let far = cfg.pose_at(1, 0.0).unwrap().distance_km;
        assert!((far - (2.0 * 6371.0 + 780.0)).abs() < 1e-9 * far);
    }

    #[test]
    fn thirty_degree_range() {
        // 6371² + 7151² - 2·6371·7151·cos 30°, evaluated in extended precision.
        let expected = 3579.930_569_843_856_7;
        let got = slant_range_km(6371.0, 780.0, 30f64.to_radians());
        assert!((got - expected).abs() < 1e-9, "{got}");
    }

    #[test]
    fn index_out_of_range() {
        let cfg = frozen(3);
        assert!(matches!(
            cfg.pose_at(3, 0.0),
            Err(Error::IndexOutOfRange { index: 3, len: 3, .. })
        ));
    }

    #[test]
    fn phase_advances_with_time() {
        let cfg = ConstellationConfig::uniform(6371.0, 780.0, 4, 0.01, PI / 2.0, 0.0).unwrap();
        let pose = cfg.pose_at(0, 100.0).unwrap();
        assert!((pose.geocentric_angle - 1.0).abs() < 1e-12);
        let wrapped = cfg.pose_at(0, 700.0).unwrap();
        assert!((wrapped.geocentric_angle - (7.0 - TAU)).abs() < 1e-12);
    }

    #[test]
    fn visible_satellite_needs_no_hops() {
        let cfg = frozen(4);
        assert_eq!(
            cfg.hops_to_visible(0, 0.0).unwrap(),
            Migration { hops: 0, target: 0 }
        );
    }

    #[test]
    fn single_hop_to_neighbour() {
        // Only satellite 0 is visible; satellite 1 sits at 100°.
        let cfg = ConstellationConfig {
            phase_offsets: vec![0.0, 100f64.to_radians(), PI, 260f64.to_radians()],
            ..frozen(4)
        };
        assert_eq!(
            cfg.hops_to_visible(1, 0.0).unwrap(),
            Migration { hops: 1, target: 0 }
        );
        assert_eq!(
            cfg.hops_to_visible(3, 0.0).unwrap(),
            Migration { hops: 1, target: 0 }
        );
    }

    #[test]
    fn eight_ring_at_170_degrees() {
        // Satellite 0 at 170°, the rest every 45° after it.
        let base = 170f64.to_radians();
        let cfg = ConstellationConfig::uniform(6371.0, 780.0, 8, 0.0, PI / 2.0, base).unwrap();
        // Brute force: walk every step count and keep the first visible index.
        let expected = (1..8)
            .map(|k| (k, (8 - k) % 8))
            .find(|&(_, idx)| cfg.pose_at(idx, 0.0).unwrap().visible)
            .unwrap();
        let got = cfg.hops_to_visible(0, 0.0).unwrap();
        assert_eq!((got.hops, got.target), expected);
        // 170° → 125° → 80°: two hops.
        assert_eq!(got.hops, 2);
    }

    #[test]
    fn no_visible_satellite_is_an_error() {
        let cfg = ConstellationConfig {
            phase_offsets: vec![PI, 3.0],
            ..frozen(1)
        };
        assert!(matches!(
            cfg.hops_to_visible(0, 0.0),
            Err(Error::NoVisibleSatellite { .. })
        ));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(ConstellationConfig::uniform(6371.0, 0.0, 4, 0.0, PI / 2.0, 0.0).is_err());
        assert!(ConstellationConfig::uniform(6371.0, 780.0, 0, 0.0, PI / 2.0, 0.0).is_err());
        assert!(ConstellationConfig::uniform(6371.0, 780.0, 4, 0.0, 4.0, 0.0).is_err());
    }
}
