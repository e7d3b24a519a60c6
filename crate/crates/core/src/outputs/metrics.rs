//! Run metrics JSON. Numeric keys carry their unit as a suffix (`_c`, `_kwh`,
//! `_w`, `_m`, ...); plain `x`, `y`, `hour`, `rank` and ratios are the exceptions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OutputError;
use crate::comfort_energy::{BuildingEnergy, EnergyRank, Hotspot};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub query: String,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    pub seed: u64,
    pub analyses: Vec<String>,
    pub building_count: usize,
    pub domain_bbox_m: [f64; 4],
    pub cell_size_m: f64,
}

/// Highest PET over the day and where it occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub pet_c: f64,
    pub mrt_c: f64,
    pub x: f64,
    pub y: f64,
    pub hour: u32,
}

/// District-wide figures for one hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourSummary {
    pub hour: u32,
    pub t_air_c: f64,
    pub wind_speed_ms: f64,
    pub dni_w_m2: f64,
    pub dhi_w_m2: f64,
    pub sun_up: bool,
    pub mrt_max_c: Option<f64>,
    pub mrt_mean_c: Option<f64>,
    pub pet_max_c: Option<f64>,
    pub pet_mean_c: Option<f64>,
    pub cooling_power_w: Option<f64>,
}

/// PET and MRT at a fixed point and hour, used to compare runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub hour: u32,
    pub lit: bool,
    pub pet_c: f64,
    pub mrt_c: f64,
    pub t_air_c: f64,
    pub wind_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub schema_version: u32,
    pub run: RunInfo,
    pub buildings: Vec<BuildingEnergy>,
    pub energy_ranking: Vec<EnergyRank>,
    pub total_cooling_kwh: Option<f64>,
    pub peak_cooling_power_w: Option<f64>,
    pub hotspots: Vec<Hotspot>,
    pub peak: Option<Peak>,
    pub hourly: Vec<HourSummary>,
    pub probes: Vec<Probe>,
    /// Output files relative to the run directory, sorted.
    pub files: Vec<String>,
}

/// Pretty JSON with a trailing newline; key order follows the struct.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| OutputError::Invalid(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_metrics(metrics: &RunMetrics, path: &Path) -> Result<(), OutputError> {
    write_json(metrics, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> RunMetrics {
        RunMetrics {
            schema_version: METRICS_SCHEMA_VERSION,
            run: RunInfo {
                query: "audit".into(),
                month: 4,
                day: 20,
                hour: 13,
                seed: 42,
                analyses: vec!["comfort".into()],
                building_count: 1,
                domain_bbox_m: [0.0, 0.0, 10.0, 10.0],
                cell_size_m: 2.0,
            },
            buildings: Vec::new(),
            energy_ranking: Vec::new(),
            total_cooling_kwh: None,
            peak_cooling_power_w: None,
            hotspots: vec![Hotspot {
                rank: 1,
                global_max: true,
                x: 1.0,
                y: 3.0,
                hour: 13,
                pet_c: 45.5,
                mrt_c: 60.25,
                wind_ms: 0.5,
                svf: 0.8,
                reflected_sw_w_m2: 120.0,
                nearest_buildings: vec!["b1".into()],
                causes: vec!["low wind".into()],
            }],
            peak: None,
            hourly: Vec::new(),
            probes: Vec::new(),
            files: vec!["metrics.json".into()],
        }
    }

    #[test]
    fn round_trip_and_stable_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        write_metrics(&minimal(), &a).unwrap();
        write_metrics(&minimal(), &b).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text, std::fs::read_to_string(&b).unwrap());
        let back: RunMetrics = serde_json::from_str(&text).unwrap();
        assert_eq!(back, minimal());
        assert!(text.contains("\"schema_version\": 1"));
    }

    #[test]
    fn hotspot_entry_shape() {
        let v = serde_json::to_value(minimal()).unwrap();
        let h = &v["hotspots"][0];
        for k in ["x", "y", "hour", "pet_c", "mrt_c", "nearest_buildings", "causes"] {
            assert!(h.get(k).is_some(), "missing {k}");
        }
    }

    /// Every numeric key either carries a unit suffix or is a known
    /// unitless name.
    pub(crate) fn unit_audit(v: &serde_json::Value, key: &str, bad: &mut Vec<String>) {
        const SUFFIXES: [&str; 9] = ["_c", "_kwh", "_w", "_m", "_m2", "_ms", "_w_m2", "_kwh_m2", "_pct"];
        const UNITLESS: [&str; 9] = [
            "x",
            "y",
            "hour",
            "rank",
            "svf",
            "month",
            "day",
            "seed",
            "schema_version",
        ];
        match v {
            serde_json::Value::Number(_) => {
                if !key.is_empty()
                    && !SUFFIXES.iter().any(|s| key.ends_with(s))
                    && !UNITLESS.contains(&key)
                    && !key.ends_with("_count")
                {
                    bad.push(key.to_string());
                }
            }
            serde_json::Value::Array(a) => a.iter().for_each(|x| unit_audit(x, key, bad)),
            serde_json::Value::Object(o) => o.iter().for_each(|(k, x)| unit_audit(x, k, bad)),
            _ => {}
        }
    }

    #[test]
    fn numeric_keys_carry_units() {
        let mut bad = Vec::new();
        unit_audit(&serde_json::to_value(minimal()).unwrap(), "", &mut bad);
        assert!(bad.is_empty(), "{bad:?}");
    }
}
