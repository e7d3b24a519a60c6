//! Envelope conduction against an indoor setpoint, building loads and EUI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ComfortError;
use crate::geometry::Building;
use crate::params::ResolvedParams;
use crate::radiation::{Scene, SurfaceClass, SurfaceState, KELVIN};

/// Storey height used to estimate gross floor area from building height, m.
pub const STOREY_HEIGHT: f64 = 3.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallProps {
    /// W/m²K.
    pub u_value: f64,
    /// °C.
    pub setpoint: f64,
    /// Response weights on T(h), T(h-1), ...; `[1.0]` is steady conduction.
    pub weights: Vec<f64>,
}

impl WallProps {
    pub fn new(u_value: f64, setpoint: f64, weights: Vec<f64>) -> Result<WallProps, ComfortError> {
        if !(u_value.is_finite() && u_value > 0.0) {
            return Err(ComfortError::Input(format!("U-value must be positive, got {u_value}")));
        }
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) || (sum - 1.0).abs() > 1e-6 {
            return Err(ComfortError::Input(format!(
                "response weights must sum to 1, got {weights:?}"
            )));
        }
        Ok(WallProps {
            u_value,
            setpoint,
            weights,
        })
    }

    pub fn steady(u_value: f64, setpoint: f64) -> Result<WallProps, ComfortError> {
        WallProps::new(u_value, setpoint, vec![1.0])
    }

    /// Roof and wall properties.
    pub fn from_params(p: &ResolvedParams) -> Result<(WallProps, WallProps), ComfortError> {
        let weights = p.list("ctf_weights").to_vec();
        let setpoint = p.num("setpoint");
        Ok((
            WallProps::new(p.num("roof_u_value"), setpoint, weights.clone())?,
            WallProps::new(p.num("wall_u_value"), setpoint, weights)?,
        ))
    }
}

/// Inward heat gain through one face at `hour`, W/m², floored at zero.
///
/// `history` holds hourly exterior surface temperatures in °C. Lags reaching
/// before index 0 wrap to the end, treating the series as a periodic day.
pub fn face_cooling_flux(history: &[f64], props: &WallProps, hour: usize) -> f64 {
    let n = history.len();
    if n == 0 {
        return 0.0;
    }
    let q: f64 = props
        .weights
        .iter()
        .enumerate()
        .map(|(k, w)| w * (history[(hour % n + n - k % n) % n] - props.setpoint))
        .sum();
    (props.u_value * q).max(0.0)
}

/// One envelope face and its hourly cooling flux (W/m²).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeFace {
    pub area: f64,
    pub flux: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingEnergy {
    pub id: String,
    pub hourly_power_w: Vec<f64>,
    pub energy_kwh: f64,
    pub envelope_area_m2: f64,
    /// Energy per envelope area.
    pub eui_kwh_m2: f64,
    /// Estimated gross floor area (footprint times storeys), when known.
    pub floor_area_m2: Option<f64>,
    /// Energy per estimated floor area.
    pub eui_floor_kwh_m2: Option<f64>,
}

impl BuildingEnergy {
    pub fn with_floor_area(mut self, floor_area: f64) -> Self {
        if floor_area > 0.0 {
            self.floor_area_m2 = Some(floor_area);
            self.eui_floor_kwh_m2 = Some(self.energy_kwh / floor_area);
        }
        self
    }
}

/// Sums face fluxes into hourly power and daily energy. `dt_hours` is the
/// length of each flux sample.
pub fn building_cooling_load(id: &str, faces: &[EnvelopeFace], dt_hours: f64) -> Result<BuildingEnergy, ComfortError> {
    let envelope: f64 = faces.iter().map(|f| f.area).sum();
    if !(envelope > 0.0) {
        return Err(ComfortError::ZeroEnvelope(id.to_string()));
    }
    let steps = faces.iter().map(|f| f.flux.len()).max().unwrap_or(0);
    let mut power = vec![0.0; steps];
    for f in faces {
        for (p, q) in power.iter_mut().zip(&f.flux) {
            *p += q.max(0.0) * f.area;
        }
    }
    let energy_kwh = power.iter().sum::<f64>() * dt_hours / 1000.0;
    Ok(BuildingEnergy {
        id: id.to_string(),
        hourly_power_w: power,
        energy_kwh,
        envelope_area_m2: envelope,
        eui_kwh_m2: energy_kwh / envelope,
        floor_area_m2: None,
        eui_floor_kwh_m2: None,
    })
}

/// Cooling loads for every building in the scene from hour-mean surface
/// temperatures. `buildings` supplies footprint and height for the floor-area
/// figure and is matched by id.
pub fn district_cooling_loads(
    scene: &Scene,
    surfaces: &[SurfaceState],
    buildings: &[Building],
    roof: &WallProps,
    wall: &WallProps,
) -> Result<Vec<BuildingEnergy>, ComfortError> {
    let mut per_building: Vec<Vec<EnvelopeFace>> = vec![Vec::new(); scene.building_ids.len()];
    for (i, face) in scene.faces.iter().enumerate() {
        let Some(b) = face.building else { continue };
        let props = match face.class {
            SurfaceClass::Roof => roof,
            SurfaceClass::Wall => wall,
            SurfaceClass::Ground => continue,
        };
        let history: Vec<f64> = surfaces.iter().map(|s| s.t_mean[i] - KELVIN).collect();
        let flux = (0..history.len())
            .map(|h| face_cooling_flux(&history, props, h))
            .collect();
        per_building[b as usize].push(EnvelopeFace { area: face.area, flux });
    }
    scene
        .building_ids
        .iter()
        .zip(per_building)
        .map(|(id, faces)| {
            let e = building_cooling_load(id, &faces, 1.0)?;
            Ok(match buildings.iter().find(|b| &b.id == id) {
                Some(b) => {
                    let storeys = (b.height / STOREY_HEIGHT).round().max(1.0);
                    e.with_floor_area(b.footprint_area * storeys)
                }
                None => e,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRank {
    pub rank: usize,
    pub id: String,
    pub eui_kwh_m2: f64,
    pub energy_kwh: f64,
    pub outlier: bool,
}

/// Buildings by EUI, highest first; outliers lie above mean + k·std
/// (population standard deviation). Fewer than two buildings yields no flags.
pub fn energy_outliers(energies: &[BuildingEnergy], k: f64) -> Vec<EnergyRank> {
    let n = energies.len() as f64;
    let threshold = if energies.len() >= 2 {
        let mean = energies.iter().map(|e| e.eui_kwh_m2).sum::<f64>() / n;
        let var = energies.iter().map(|e| (e.eui_kwh_m2 - mean).powi(2)).sum::<f64>() / n;
        mean + k * var.sqrt()
    } else {
        f64::INFINITY
    };
    let mut order: Vec<&BuildingEnergy> = energies.iter().collect();
    order.sort_by(|a, b| b.eui_kwh_m2.total_cmp(&a.eui_kwh_m2).then_with(|| a.id.cmp(&b.id)));
    order
        .into_iter()
        .enumerate()
        .map(|(i, e)| EnergyRank {
            rank: i + 1,
            id: e.id.clone(),
            eui_kwh_m2: e.eui_kwh_m2,
            energy_kwh: e.energy_kwh,
            // Tolerance keeps identical EUIs from flagging through rounding.
            outlier: e.eui_kwh_m2 > threshold + 1e-12 * threshold.abs().max(1.0),
        })
        .collect()
}

/// `building_energy.json`.
pub fn write_building_energy_json(energies: &[BuildingEnergy], path: &Path) -> Result<(), ComfortError> {
    let text = serde_json::to_string_pretty(energies).map_err(|e| ComfortError::Io(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| ComfortError::Io(format!("{}: {e}", path.display())))
}
