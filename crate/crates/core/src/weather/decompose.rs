//! Splitting global horizontal irradiance into beam and diffuse parts with
//! the Erbs clearness-index correlation.

use serde::{Deserialize, Serialize};

/// Solar constant, W/m².
pub const SOLAR_CONSTANT: f64 = 1367.0;

/// Piecewise diffuse-fraction correlation `kd(kt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErbsCoefficients {
    /// Upper bound of the low-clearness branch.
    pub kt_low: f64,
    /// Lower bound of the clear-sky branch.
    pub kt_high: f64,
    /// `kd = c0 + c1·kt` for `kt ≤ kt_low`.
    pub low: [f64; 2],
    /// Quartic in `kt` for the middle branch, ascending powers.
    pub mid: [f64; 5],
    /// Constant `kd` for `kt > kt_high`.
    pub high: f64,
}

impl Default for ErbsCoefficients {
    fn default() -> Self {
        ErbsCoefficients {
            kt_low: 0.22,
            kt_high: 0.80,
            low: [1.0, -0.09],
            mid: [0.9511, -0.1604, 4.388, -16.638, 12.336],
            high: 0.165,
        }
    }
}

impl ErbsCoefficients {
    pub fn diffuse_fraction(&self, kt: f64) -> f64 {
        let kd = if kt <= self.kt_low {
            self.low[0] + self.low[1] * kt
        } else if kt <= self.kt_high {
            self.mid.iter().rev().fold(0.0, |acc, c| acc * kt + c)
        } else {
            self.high
        };
        kd.clamp(0.0, 1.0)
    }
}

/// Extraterrestrial normal irradiance with Spencer's eccentricity correction.
pub fn extraterrestrial_irradiance(doy: u32) -> f64 {
    let g = 2.0 * std::f64::consts::PI * (doy as f64 - 1.0) / 365.0;
    SOLAR_CONSTANT
        * (1.000110 + 0.034221 * g.cos() + 0.001280 * g.sin() + 0.000719 * (2.0 * g).cos() + 0.000077 * (2.0 * g).sin())
}

/// Returns `(dni, dhi)`. With the sun at or below the horizon everything is
/// diffuse. DNI is capped at the extraterrestrial irradiance; DHI then takes
/// the remainder so that `dni·cos z + dhi = ghi` holds exactly.
pub fn decompose_ghi(ghi: f64, zenith_deg: f64, e0: f64, coeffs: &ErbsCoefficients) -> (f64, f64) {
    let ghi = ghi.max(0.0);
    let cos_z = zenith_deg.to_radians().cos();
    if ghi == 0.0 {
        return (0.0, 0.0);
    }
    if zenith_deg >= 90.0 || cos_z <= 0.0 || e0 <= 0.0 {
        return (0.0, ghi);
    }
    let kt = ghi / (e0 * cos_z);
    let dhi = (coeffs.diffuse_fraction(kt) * ghi).min(ghi);
    let dni = ((ghi - dhi) / cos_z).min(e0).max(0.0);
    let dhi = (ghi - dni * cos_z).clamp(0.0, ghi);
    (dni, dhi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_branches() {
        let c = ErbsCoefficients::default();
        assert_eq!(decompose_ghi(0.0, 30.0, 1367.0, &c), (0.0, 0.0));
        assert_eq!(decompose_ghi(50.0, 95.0, 1367.0, &c), (0.0, 50.0));
    }

    #[test]
    fn kt_half_at_thirty_degrees() {
        let c = ErbsCoefficients::default();
        let e0 = 1367.0;
        let cz = 30f64.to_radians().cos();
        let ghi = 0.5 * e0 * cz;
        let (dni, dhi) = decompose_ghi(ghi, 30.0, e0, &c);
        // Hand evaluation of the middle branch at kt = 0.5.
        let kd: f64 = 0.9511 - 0.1604 * 0.5 + 4.388 * 0.25 - 16.638 * 0.125 + 12.336 * 0.0625;
        assert!((kd - 0.65915).abs() < 1e-12);
        assert!((dhi - kd * ghi).abs() < 1e-9);
        assert!((dni - (1.0 - kd) * ghi / cz).abs() < 1e-9);
    }

    #[test]
    fn grazing_sun_caps_beam() {
        let c = ErbsCoefficients::default();
        let (dni, dhi) = decompose_ghi(300.0, 89.9, 1367.0, &c);
        assert!(dni <= 1367.0);
        assert!((0.0..=300.0).contains(&dhi));
    }

    #[test]
    fn eccentricity_extremes() {
        assert!((extraterrestrial_irradiance(3) - 1412.0).abs() < 3.0);
        assert!((extraterrestrial_irradiance(185) - 1322.0).abs() < 3.0);
    }
}
