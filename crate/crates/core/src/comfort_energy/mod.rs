//! Pedestrian comfort (PET), envelope cooling loads and hotspot ranking.

mod energy;
mod hotspots;
mod pet;

use std::path::Path;

use rayon::prelude::*;

pub use energy::{
    building_cooling_load, district_cooling_loads, energy_outliers, face_cooling_flux, write_building_energy_json,
    BuildingEnergy, EnergyRank, EnvelopeFace, WallProps, STOREY_HEIGHT,
};
pub use hotspots::{
    hotspot_scan, nearest_buildings, pet_samples, write_hotspots_json, CauseThresholds, Hotspot, PetSample,
};
pub use pet::{pet, PersonParams, Sex, MIN_WIND};

use crate::outputs::{write_vtk_structured, FieldGrid, OutputError};
use crate::radiation::{PedestrianGrid, PedestrianHour};

#[derive(Debug, thiserror::Error)]
pub enum ComfortError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("{stage} did not converge for t_air {:.2}, mrt {:.2}, wind {:.2}, rh {:.1}", inputs[0], inputs[1], inputs[2], inputs[3])]
    NotConverged { stage: &'static str, inputs: [f64; 4] },
    #[error("building {0} has zero envelope area")]
    ZeroEnvelope(String),
    #[error("no valid PET values to scan")]
    NoValidPoints,
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0}")]
    Io(String),
}

/// PET at every pedestrian point for one hour; NaN where the point is invalid.
pub fn pet_field(hour: &PedestrianHour, person: &PersonParams) -> Result<Vec<f64>, ComfortError> {
    (0..hour.mrt.len())
        .into_par_iter()
        .map(|k| {
            let (ta, tr) = (hour.t_air[k], hour.mrt[k]);
            if !ta.is_finite() || !tr.is_finite() {
                return Ok(f64::NAN);
            }
            pet(ta, tr, hour.wind[k], hour.rh[k].clamp(0.0, 100.0), person)
        })
        .collect()
}

/// `pet_<hour>.vtk`: PET alongside MRT at pedestrian height.
pub fn write_pet_vtk(
    ped: &PedestrianGrid,
    hour: &PedestrianHour,
    pet: &[f64],
    path: &Path,
) -> Result<(), ComfortError> {
    let g = ped.grid;
    let grid = FieldGrid::new(
        [
            g.origin[0] + 0.5 * g.cell_size,
            g.origin[1] + 0.5 * g.cell_size,
            ped.height,
        ],
        [g.cell_size, g.cell_size],
        g.nx,
        g.ny,
    )
    .with_scalar("pet", pet.to_vec())
    .with_scalar("mrt", hour.mrt.clone());
    let title = format!("physiological equivalent temperature hour {} (degC)", hour.hour);
    Ok(write_vtk_structured(&grid, &title, path)?)
}
