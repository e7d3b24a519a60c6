use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::scene::{PedestrianGrid, Scene, SurfaceClass, View, FAR_GROUND};
use super::{
    convective_coefficient, longwave_exchange, shortwave_in, step_surface_temperature, FaceBalance, PersonRadiation,
    PointRadiation, RadiationError, SkyState, KELVIN, STEFAN_BOLTZMANN, T_SURF_BOUNDS,
};
use crate::geometry::Vec3;
use crate::outputs::{write_vtk_polydata, write_vtk_structured, CellArray, FieldGrid};
use crate::params::{ForcingHour, ResolvedParams};
use crate::weather::{solar_position, SiteLocation, WeatherField};
use crate::windflow::{adjust_air_state, WindBasis, WindVolume};

/// Settings of the diurnal surface simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiationConfig {
    pub sky_emissivity: f64,
    pub h_conv_a: f64,
    pub h_conv_b: f64,
    pub substep_seconds: f64,
    pub spinup_days: u32,
    pub k_mix: f64,
    pub dt_max: f64,
    pub person: PersonRadiation,
}

impl RadiationConfig {
    pub fn from_params(p: &ResolvedParams) -> Self {
        RadiationConfig {
            sky_emissivity: p.num("sky_emissivity"),
            h_conv_a: p.num("h_conv_a"),
            h_conv_b: p.num("h_conv_b"),
            substep_seconds: p.num("substep_seconds"),
            spinup_days: p.int("spinup_days") as u32,
            k_mix: p.num("k_mix"),
            dt_max: p.num("dt_max"),
            person: PersonRadiation::from_params(p),
        }
    }
}

impl Default for RadiationConfig {
    fn default() -> Self {
        RadiationConfig {
            sky_emissivity: 0.85,
            h_conv_a: 5.7,
            h_conv_b: 3.8,
            substep_seconds: 600.0,
            spinup_days: 1,
            k_mix: 0.3,
            dt_max: 2.0,
            person: PersonRadiation::default(),
        }
    }
}

/// One hour of weather with the sun at the hour midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HourForcing {
    /// EPW hour, 1..=24.
    pub hour: u32,
    /// °C.
    pub t_air: f64,
    pub rh: f64,
    pub wind_speed: f64,
    pub wind_direction: f64,
    pub dni: f64,
    pub dhi: f64,
    /// Unit vector towards the sun when above the horizon.
    pub sun: Option<Vec3>,
}

impl HourForcing {
    /// Irradiance is zeroed while the sun is below the horizon at the midpoint.
    pub fn from_forcing(f: &ForcingHour, site: &SiteLocation, year: i32) -> HourForcing {
        let pos = solar_position(site, year, f.timestamp());
        let sun = pos.is_up().then(|| {
            let [x, y, z] = pos.direction();
            Vec3::new(x, y, z)
        });
        let up = if sun.is_some() { 1.0 } else { 0.0 };
        HourForcing {
            hour: f.hour,
            t_air: f.get(WeatherField::AirTemperature),
            rh: f.get(WeatherField::RelativeHumidity),
            wind_speed: f.get(WeatherField::WindSpeed),
            wind_direction: f.get(WeatherField::WindDirection),
            dni: up * f.get(WeatherField::Dni),
            dhi: up * f.get(WeatherField::Dhi),
            sun,
        }
    }

    pub fn sky(&self) -> SkyState {
        SkyState {
            sun: self.sun,
            dni: self.dni,
            dhi: self.dhi,
        }
    }
}

/// Face state at the end of an hour plus the hour-mean temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceState {
    pub hour: u32,
    /// K, end of hour.
    pub t_surf: Vec<f64>,
    /// K, mean over the hour's substeps.
    pub t_mean: Vec<f64>,
    pub q_sw_in: Vec<f64>,
    pub q_sw_abs: Vec<f64>,
    pub q_lw_in: Vec<f64>,
    pub q_lw_out: Vec<f64>,
    pub q_conv: Vec<f64>,
    pub lit: Vec<bool>,
}

/// Pedestrian-level fields for one hour; NaN at invalid points.
#[derive(Debug, Clone, PartialEq)]
pub struct PedestrianHour {
    pub hour: u32,
    pub lit: Vec<bool>,
    /// °C.
    pub mrt: Vec<f64>,
    /// Local air temperature, °C.
    pub t_air: Vec<f64>,
    pub rh: Vec<f64>,
    pub wind: Vec<f64>,
    /// Surroundings-reflected shortwave, W/m².
    pub reflected_sw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiurnalResult {
    pub surfaces: Vec<SurfaceState>,
    pub pedestrian: Vec<PedestrianHour>,
}

/// Local wind at a point, clamped into the wind grid's plan extent.
struct LocalWind {
    volume: Option<WindVolume>,
    uniform: f64,
}

impl LocalWind {
    fn new(basis: Option<&WindBasis>, f: &HourForcing) -> Result<LocalWind, RadiationError> {
        let volume = match basis {
            Some(b) => Some(b.volume(f.wind_speed, f.wind_direction)?),
            None => None,
        };
        Ok(LocalWind {
            volume,
            uniform: f.wind_speed,
        })
    }

    /// Returns `(local speed, free-stream speed)` at `p`.
    fn at(&self, p: Vec3) -> Result<(f64, f64), RadiationError> {
        let Some(vol) = &self.volume else {
            return Ok((self.uniform, self.uniform));
        };
        let e = vol.slices[0].grid.extent();
        let eps = 1e-9;
        let x = p.x.clamp(e[0] + eps, e[2] - eps);
        let y = p.y.clamp(e[1] + eps, e[3] - eps);
        Ok((vol.speed_at([x, y, p.z])?, vol.reference_speed(p.z)))
    }

    fn cell(&self) -> f64 {
        self.volume.as_ref().map_or(1.0, |v| v.slices[0].grid.cell_size)
    }
}

fn radiant_mean(view: &View, t: &[f64], far: f64) -> Option<f64> {
    view.mean_over_hits(|id| {
        let tt = if id == FAR_GROUND { far } else { t[id as usize] };
        tt.powi(4)
    })
    .map(|m| m.powf(0.25))
}

fn far_ground_temperature(scene: &Scene, t: &[f64], fallback: f64) -> f64 {
    let (mut s, mut a) = (0.0, 0.0);
    for (f, tt) in scene.faces.iter().zip(t) {
        if f.class == SurfaceClass::Ground {
            s += f.area * tt;
            a += f.area;
        }
    }
    if a > 0.0 {
        s / a
    } else {
        fallback
    }
}

/// Per-face inputs constant within an hour.
struct HourFace {
    q_sw_in: f64,
    h: f64,
    t_air: f64,
}

/// Integrates the surface heat balance over `spinup_days` repetitions of the
/// day followed by the recorded day, then evaluates pedestrian MRT per hour.
pub fn simulate_day(
    scene: &Scene,
    face_views: &[View],
    pedestrian: Option<&PedestrianGrid>,
    forcing: &[HourForcing],
    wind: Option<&WindBasis>,
    cfg: &RadiationConfig,
) -> Result<DiurnalResult, RadiationError> {
    if forcing.len() != 24 {
        return Err(RadiationError::Forcing(forcing.len()));
    }
    if face_views.len() != scene.faces.len() {
        return Err(RadiationError::Config(format!(
            "{} views for {} faces",
            face_views.len(),
            scene.faces.len()
        )));
    }
    if !(cfg.substep_seconds > 0.0) {
        return Err(RadiationError::Config("substep_seconds must be positive".into()));
    }
    let n_sub = (3600.0 / cfg.substep_seconds).ceil().max(1.0) as usize;
    let dt = 3600.0 / n_sub as f64;
    let nf = scene.faces.len();

    // Shadows and local air per hour are identical on every simulated day.
    let mut hours = Vec::with_capacity(24);
    for f in forcing {
        let sky = f.sky();
        let lit: Vec<bool> = match sky.sun {
            Some(sun) => (0..nf).into_par_iter().map(|k| scene.face_lit(k, sun)).collect(),
            None => vec![false; nf],
        };
        let w = LocalWind::new(wind, f)?;
        let offset = w.cell();
        let per_face = scene
            .faces
            .par_iter()
            .enumerate()
            .map(|(k, face)| {
                let view = &face_views[k];
                let rho = view.mean_over_hits(|id| scene.albedo_of(id)).unwrap_or(0.0);
                let q_sw_in = shortwave_in(face.normal, lit[k], &sky, view.svf, rho);
                let (local, reference) = w.at(face.centroid + face.normal * offset)?;
                let air = adjust_air_state(f.t_air, f.rh, local, reference, cfg.k_mix, cfg.dt_max);
                Ok(HourFace {
                    q_sw_in,
                    h: convective_coefficient(local, cfg.h_conv_a, cfg.h_conv_b),
                    t_air: air.t_adj + KELVIN,
                })
            })
            .collect::<Result<Vec<_>, RadiationError>>()?;
        hours.push((lit, per_face, w));
    }

    let mut t = vec![forcing[0].t_air + KELVIN; nf];
    let mut surfaces = Vec::with_capacity(24);
    for day in 0..=cfg.spinup_days {
        let record = day == cfg.spinup_days;
        for (hi, f) in forcing.iter().enumerate() {
            let (lit, per_face, _) = &hours[hi];
            let mut t_sum = vec![0.0; nf];
            let mut q_lw_in = vec![0.0; nf];
            for _ in 0..n_sub {
                let far = far_ground_temperature(scene, &t, f.t_air + KELVIN);
                let next: Vec<(f64, f64)> = (0..nf)
                    .into_par_iter()
                    .map(|k| {
                        let face = &scene.faces[k];
                        let hf = &per_face[k];
                        let view = &face_views[k];
                        let t_sur = radiant_mean(view, &t, far).unwrap_or(hf.t_air);
                        let (lw_in, _) =
                            longwave_exchange(t[k], face.emissivity, t_sur, hf.t_air, view.svf, cfg.sky_emissivity);
                        let b = FaceBalance {
                            q_sw_abs: (1.0 - face.albedo) * hf.q_sw_in,
                            q_lw_in: lw_in,
                            h: hf.h,
                            t_air: hf.t_air,
                            emissivity: face.emissivity,
                            heat_capacity: face.heat_capacity,
                        };
                        (step_surface_temperature(t[k], &b, dt), lw_in)
                    })
                    .collect();
                for (k, (tn, lw)) in next.into_iter().enumerate() {
                    if !(T_SURF_BOUNDS.0..=T_SURF_BOUNDS.1).contains(&tn) {
                        let face = &scene.faces[k];
                        return Err(RadiationError::Diverged {
                            face: k,
                            class: face.class.name(),
                            hour: f.hour,
                            t_surf: tn,
                            q_sw_abs: (1.0 - face.albedo) * per_face[k].q_sw_in,
                            h: per_face[k].h,
                            t_air: per_face[k].t_air,
                        });
                    }
                    t[k] = tn;
                    t_sum[k] += tn;
                    q_lw_in[k] = lw;
                }
            }
            if record {
                let faces = &scene.faces;
                surfaces.push(SurfaceState {
                    hour: f.hour,
                    t_mean: t_sum.iter().map(|s| s / n_sub as f64).collect(),
                    q_sw_in: per_face.iter().map(|p| p.q_sw_in).collect(),
                    q_sw_abs: per_face
                        .iter()
                        .zip(faces)
                        .map(|(p, fc)| (1.0 - fc.albedo) * p.q_sw_in)
                        .collect(),
                    q_lw_out: t
                        .iter()
                        .zip(faces)
                        .map(|(tt, fc)| fc.emissivity * STEFAN_BOLTZMANN * tt.powi(4))
                        .collect(),
                    q_conv: t.iter().zip(per_face).map(|(tt, p)| p.h * (tt - p.t_air)).collect(),
                    q_lw_in,
                    t_surf: t.clone(),
                    lit: lit.clone(),
                });
            }
        }
    }

    let pedestrian = match pedestrian {
        Some(ped) => forcing
            .iter()
            .zip(&surfaces)
            .zip(&hours)
            .map(|((f, state), (_, _, w))| pedestrian_hour(scene, ped, f, state, w, cfg))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    Ok(DiurnalResult { surfaces, pedestrian })
}

fn pedestrian_hour(
    scene: &Scene,
    ped: &PedestrianGrid,
    f: &HourForcing,
    state: &SurfaceState,
    w: &LocalWind,
    cfg: &RadiationConfig,
) -> Result<PedestrianHour, RadiationError> {
    let sky = f.sky();
    let far = far_ground_temperature(scene, &state.t_mean, f.t_air + KELVIN);
    let n = ped.grid.len();
    let rows = (0..n)
        .into_par_iter()
        .map(|k| {
            if !ped.valid[k] {
                return Ok((false, [f64::NAN; 5]));
            }
            let p = ped.point(k);
            let lit = sky.sun.is_some_and(|s| ped.lit(scene, k, s));
            let (local, reference) = w.at(p)?;
            let air = adjust_air_state(f.t_air, f.rh, local, reference, cfg.k_mix, cfg.dt_max);
            let view = &ped.views[k];
            let t_air_k = air.t_adj + KELVIN;
            let pr = PointRadiation {
                lit,
                svf: view.svf,
                rho_context: view.mean_over_hits(|id| scene.albedo_of(id)).unwrap_or(0.0),
                t_air: t_air_k,
                t_surround: radiant_mean(view, &state.t_mean, far).unwrap_or(t_air_k),
                sky_emissivity: cfg.sky_emissivity,
            };
            Ok((
                lit,
                [
                    pr.mrt(&sky, &cfg.person),
                    air.t_adj,
                    air.rh_adj,
                    local,
                    pr.reflected_sw(&sky),
                ],
            ))
        })
        .collect::<Result<Vec<_>, RadiationError>>()?;
    let col = |i: usize| rows.iter().map(|r| r.1[i]).collect::<Vec<f64>>();
    Ok(PedestrianHour {
        hour: f.hour,
        lit: rows.iter().map(|r| r.0).collect(),
        mrt: col(0),
        t_air: col(1),
        rh: col(2),
        wind: col(3),
        reflected_sw: col(4),
    })
}

/// `surface_T_<hour>.vtk`: per-face temperatures and flux components.
pub fn write_surface_vtk(scene: &Scene, state: &SurfaceState, path: &Path) -> Result<(), RadiationError> {
    let class: Vec<i64> = scene
        .faces
        .iter()
        .map(|f| match f.class {
            SurfaceClass::Roof => 0,
            SurfaceClass::Wall => 1,
            SurfaceClass::Ground => 2,
        })
        .collect();
    let building: Vec<i64> = scene.faces.iter().map(|f| f.building.map_or(-1, i64::from)).collect();
    let albedo: Vec<f64> = scene.faces.iter().map(|f| f.albedo).collect();
    let lit: Vec<i64> = state.lit.iter().map(|&l| l as i64).collect();
    let arrays = [
        CellArray::Float("T_surf", &state.t_surf),
        CellArray::Float("T_mean", &state.t_mean),
        CellArray::Float("q_sw_in", &state.q_sw_in),
        CellArray::Float("q_sw_abs", &state.q_sw_abs),
        CellArray::Float("q_lw_in", &state.q_lw_in),
        CellArray::Float("q_lw_out", &state.q_lw_out),
        CellArray::Float("q_conv", &state.q_conv),
        CellArray::Float("albedo", &albedo),
        CellArray::Int("lit", &lit),
        CellArray::Int("class", &class),
        CellArray::Int("building", &building),
    ];
    let title = format!(
        "surface temperature hour {} (K, W/m2; class 0 roof 1 wall 2 ground)",
        state.hour
    );
    Ok(write_vtk_polydata(&scene.mesh, &arrays, &title, path)?)
}

fn pedestrian_grid(ped: &PedestrianGrid) -> FieldGrid {
    let g = ped.grid;
    FieldGrid::new(
        [
            g.origin[0] + 0.5 * g.cell_size,
            g.origin[1] + 0.5 * g.cell_size,
            ped.height,
        ],
        [g.cell_size, g.cell_size],
        g.nx,
        g.ny,
    )
}

/// `mrt_<hour>.vtk`: MRT and its local inputs at pedestrian height.
pub fn write_pedestrian_vtk(ped: &PedestrianGrid, hour: &PedestrianHour, path: &Path) -> Result<(), RadiationError> {
    let lit = hour.lit.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let grid = pedestrian_grid(ped)
        .with_scalar("mrt", hour.mrt.clone())
        .with_scalar("t_air", hour.t_air.clone())
        .with_scalar("rh", hour.rh.clone())
        .with_scalar("wind", hour.wind.clone())
        .with_scalar("reflected_sw", hour.reflected_sw.clone())
        .with_scalar("lit", lit);
    let title = format!("pedestrian radiant field hour {} (degC, W/m2, m/s)", hour.hour);
    Ok(write_vtk_structured(&grid, &title, path)?)
}

/// `svf.vtk`: upper-hemisphere sky view factor at pedestrian height.
pub fn write_svf_vtk(ped: &PedestrianGrid, path: &Path) -> Result<(), RadiationError> {
    let valid = ped.valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let grid = pedestrian_grid(ped)
        .with_scalar("svf", ped.svf.clone())
        .with_scalar("valid", valid);
    Ok(write_vtk_structured(
        &grid,
        "sky view factor at pedestrian height",
        path,
    )?)
}
