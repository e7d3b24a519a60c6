//! Solar position from Spencer's Fourier series for declination and the
//! equation of time. No atmospheric refraction.

use serde::{Deserialize, Serialize};

use super::{SiteLocation, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarPosition {
    /// Degrees clockwise from north, in [0, 360).
    pub azimuth: f64,
    /// Degrees above the horizon.
    pub elevation: f64,
    pub zenith: f64,
}

impl SolarPosition {
    pub fn is_up(&self) -> bool {
        self.elevation > 0.0
    }

    /// Unit vector pointing from the ground towards the sun (x east, y north, z up).
    pub fn direction(&self) -> [f64; 3] {
        let (az, el) = (self.azimuth.to_radians(), self.elevation.to_radians());
        [el.cos() * az.sin(), el.cos() * az.cos(), el.sin()]
    }
}

pub fn day_of_year(year: i32, month: u32, day: u32) -> u32 {
    super::ordinal(year, month, day)
}

/// Day angle in radians, including the fractional day.
pub(crate) fn day_angle(doy: u32, local_hours: f64) -> f64 {
    2.0 * std::f64::consts::PI * (doy as f64 - 1.0 + (local_hours - 12.0) / 24.0) / 365.0
}

/// Position for a timestamp, evaluated at the midpoint of its EPW hour.
pub fn solar_position(site: &SiteLocation, year: i32, ts: Timestamp) -> SolarPosition {
    solar_position_at(site, day_of_year(year, ts.month, ts.day), ts.mid_hour())
}

/// Position at `local_hours` (local standard time, decimal) on day `doy`.
pub fn solar_position_at(site: &SiteLocation, doy: u32, local_hours: f64) -> SolarPosition {
    let g = day_angle(doy, local_hours);
    let decl = 0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin() - 0.006758 * (2.0 * g).cos()
        + 0.000907 * (2.0 * g).sin()
        - 0.002697 * (3.0 * g).cos()
        + 0.00148 * (3.0 * g).sin();
    let eot_min = 229.18
        * (0.000075 + 0.001868 * g.cos()
            - 0.032077 * g.sin()
            - 0.014615 * (2.0 * g).cos()
            - 0.040849 * (2.0 * g).sin());
    let solar_min = local_hours * 60.0 + eot_min + 4.0 * site.longitude - 60.0 * site.utc_offset;
    let ha = (solar_min / 4.0 - 180.0).to_radians();
    let lat = site.latitude.to_radians();

    let cos_z = (lat.sin() * decl.sin() + lat.cos() * decl.cos() * ha.cos()).clamp(-1.0, 1.0);
    let zenith = cos_z.acos().to_degrees();
    // Azimuth measured from south (west positive), then shifted to north.
    let az_south = ha.sin().atan2(ha.cos() * lat.sin() - decl.tan() * lat.cos());
    let azimuth = (az_south.to_degrees() + 180.0).rem_euclid(360.0);
    SolarPosition {
        azimuth: if azimuth >= 360.0 { 0.0 } else { azimuth },
        elevation: 90.0 - zenith,
        zenith,
    }
}
