//! Ranked thermal hotspots from hourly PET fields.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ComfortError;
use crate::geometry::Building;
use crate::params::ResolvedParams;
use crate::radiation::{PedestrianGrid, PedestrianHour};

/// One pedestrian-level point at one hour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PetSample {
    pub x: f64,
    pub y: f64,
    pub hour: u32,
    pub pet: f64,
    pub mrt: f64,
    pub wind: f64,
    pub svf: f64,
    pub reflected_sw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauseThresholds {
    /// m/s; below this tags "low wind".
    pub low_wind: f64,
    /// Above this tags "high svf".
    pub high_svf: f64,
    /// W/m²; above this tags "reflected gain".
    pub reflected_sw: f64,
}

impl Default for CauseThresholds {
    fn default() -> Self {
        CauseThresholds {
            low_wind: 1.0,
            high_svf: 0.7,
            reflected_sw: 100.0,
        }
    }
}

impl CauseThresholds {
    pub fn from_params(p: &ResolvedParams) -> Self {
        CauseThresholds {
            low_wind: p.num("low_wind_threshold"),
            high_svf: p.num("high_svf_threshold"),
            reflected_sw: p.num("reflected_sw_threshold"),
        }
    }

    fn tags(&self, s: &PetSample) -> Vec<String> {
        let mut out = Vec::new();
        if s.wind < self.low_wind {
            out.push("low wind".to_string());
        }
        if s.svf > self.high_svf {
            out.push("high svf".to_string());
        }
        if s.reflected_sw > self.reflected_sw {
            out.push("reflected gain".to_string());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub rank: usize,
    /// True for the single highest PET over the day.
    pub global_max: bool,
    pub x: f64,
    pub y: f64,
    pub hour: u32,
    pub pet_c: f64,
    pub mrt_c: f64,
    pub wind_ms: f64,
    pub svf: f64,
    pub reflected_sw_w_m2: f64,
    pub nearest_buildings: Vec<String>,
    pub causes: Vec<String>,
}

/// Severity order: higher PET first, then earlier hour, then smaller x, then smaller y.
fn severity(a: &PetSample, b: &PetSample) -> Ordering {
    b.pet
        .total_cmp(&a.pet)
        .then(a.hour.cmp(&b.hour))
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
}

/// Up to `count` building ids ordered by plan distance to their footprints.
pub fn nearest_buildings(buildings: &[Building], x: f64, y: f64, count: usize) -> Vec<String> {
    let mut d: Vec<(f64, &str)> = buildings
        .iter()
        .map(|b| (b.footprint.distance(x, y), b.id.as_str()))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    d.into_iter().take(count).map(|(_, id)| id.to_string()).collect()
}

/// Per-hour PET maxima ranked by severity; the first entry is the global
/// maximum. Samples with non-finite PET are ignored. The result does not
/// depend on sample order.
pub fn hotspot_scan(
    samples: &[PetSample],
    buildings: &[Building],
    thresholds: &CauseThresholds,
    count: usize,
) -> Result<Vec<Hotspot>, ComfortError> {
    let mut best: BTreeMap<u32, PetSample> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.pet.is_finite()) {
        best.entry(s.hour)
            .and_modify(|cur| {
                if severity(s, cur) == Ordering::Less {
                    *cur = *s;
                }
            })
            .or_insert(*s);
    }
    if best.is_empty() {
        return Err(ComfortError::NoValidPoints);
    }
    let mut ranked: Vec<PetSample> = best.into_values().collect();
    ranked.sort_by(severity);
    Ok(ranked
        .iter()
        .take(count)
        .enumerate()
        .map(|(i, s)| Hotspot {
            rank: i + 1,
            global_max: i == 0,
            x: s.x,
            y: s.y,
            hour: s.hour,
            pet_c: s.pet,
            mrt_c: s.mrt,
            wind_ms: s.wind,
            svf: s.svf,
            reflected_sw_w_m2: s.reflected_sw,
            nearest_buildings: nearest_buildings(buildings, s.x, s.y, 2),
            causes: thresholds.tags(s),
        })
        .collect())
}

/// Valid pedestrian points of one hour as scan samples.
pub fn pet_samples(ped: &PedestrianGrid, hour: &PedestrianHour, pet: &[f64]) -> Vec<PetSample> {
    let g = ped.grid;
    let mut out = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            if !ped.valid[k] || !pet[k].is_finite() {
                continue;
            }
            let [x, y] = g.centre(i, j);
            out.push(PetSample {
                x,
                y,
                hour: hour.hour,
                pet: pet[k],
                mrt: hour.mrt[k],
                wind: hour.wind[k],
                svf: ped.svf[k],
                reflected_sw: hour.reflected_sw[k],
            });
        }
    }
    out
}

/// `hotspots.json`.
pub fn write_hotspots_json(hotspots: &[Hotspot], path: &Path) -> Result<(), ComfortError> {
    let text = serde_json::to_string_pretty(hotspots).map_err(|e| ComfortError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| ComfortError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(x: f64, y: f64, hour: u32, pet: f64) -> PetSample {
        PetSample {
            x,
            y,
            hour,
            pet,
            mrt: pet + 10.0,
            wind: 2.0,
            svf: 0.5,
            reflected_sw: 20.0,
        }
    }

    fn field() -> Vec<PetSample> {
        let mut v = Vec::new();
        for h in 0..24 {
            for i in 0..5 {
                for j in 0..5 {
                    v.push(sample(
                        i as f64,
                        j as f64,
                        h,
                        30.0 + 0.1 * (i + j) as f64 + 0.01 * h as f64,
                    ));
                }
            }
        }
        v
    }

    #[test]
    fn injected_maximum_ranks_first() {
        let mut v = field();
        let k = v.iter().position(|s| s.hour == 13 && s.x == 2.0 && s.y == 3.0).unwrap();
        v[k].pet = 52.0;
        let hs = hotspot_scan(&v, &[], &CauseThresholds::default(), 10).unwrap();
        assert_eq!((hs[0].x, hs[0].y, hs[0].hour, hs[0].pet_c), (2.0, 3.0, 13, 52.0));
        assert!(hs[0].global_max && !hs[1].global_max);
        assert_eq!(hs.len(), 10);
        for h in &hs {
            let top = v
                .iter()
                .filter(|s| s.hour == h.hour)
                .map(|s| s.pet)
                .fold(f64::MIN, f64::max);
            assert_eq!(h.pet_c, top);
        }
    }

    #[test]
    fn ties_prefer_earlier_hour_then_smaller_xy() {
        let v = vec![
            sample(5.0, 1.0, 14, 40.0),
            sample(3.0, 9.0, 13, 40.0),
            sample(3.0, 2.0, 13, 40.0),
            sample(1.0, 1.0, 15, 39.0),
        ];
        let hs = hotspot_scan(&v, &[], &CauseThresholds::default(), 10).unwrap();
        assert_eq!((hs[0].x, hs[0].y, hs[0].hour), (3.0, 2.0, 13));
        assert_eq!(hs[1].hour, 14);
        assert_eq!(hs[2].hour, 15);
    }

    #[test]
    fn causes_follow_thresholds() {
        let mut s = sample(0.0, 0.0, 12, 45.0);
        s.wind = 0.5;
        s.svf = 0.9;
        s.reflected_sw = 150.0;
        let hs = hotspot_scan(&[s], &[], &CauseThresholds::default(), 1).unwrap();
        assert_eq!(hs[0].causes, ["low wind", "high svf", "reflected gain"]);
    }

    #[test]
    fn all_invalid_is_an_error() {
        let v = vec![sample(0.0, 0.0, 1, f64::NAN)];
        assert!(matches!(
            hotspot_scan(&v, &[], &CauseThresholds::default(), 5),
            Err(ComfortError::NoValidPoints)
        ));
    }
}
