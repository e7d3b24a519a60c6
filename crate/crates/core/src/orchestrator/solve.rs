//! Stage 4: wind, surface energy balance, PET and cooling loads for one
//! parameter set. Geometry-dependent products are built once and reused by
//! mitigation reruns.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::advisor::Analyses;
use super::OrchestratorError;
use crate::comfort_energy::{
    district_cooling_loads, energy_outliers, hotspot_scan, pet_field, pet_samples, write_building_energy_json,
    write_hotspots_json, write_pet_vtk, BuildingEnergy, CauseThresholds, PersonParams, WallProps,
};
use crate::geometry::{BuildingSet, Grid2, HeightRaster};
use crate::outputs::{HourSummary, Peak, Probe, RunInfo, RunMetrics, METRICS_SCHEMA_VERSION};
use crate::params::ResolvedParams;
use crate::radiation::{
    simulate_day, write_pedestrian_vtk, write_surface_vtk, write_svf_vtk, DiurnalResult, HourForcing, MaterialSet,
    PedestrianGrid, RadiationConfig, Scene, SurfaceClass, View,
};
use crate::windflow::{solve_control, WindBasis};

/// A fixed point and hour at which PET and MRT are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub label: String,
    pub x: f64,
    pub y: f64,
    /// EPW hour, 1..=24.
    pub hour: u32,
}

impl From<&Probe> for ProbeSpec {
    fn from(p: &Probe) -> Self {
        ProbeSpec {
            label: p.label.clone(),
            x: p.x,
            y: p.y,
            hour: p.hour,
        }
    }
}

/// Surface materials for one run: the baseline set everywhere, optionally
/// replaced on a subset of buildings and the ground near them.
#[derive(Debug, Clone, PartialEq)]
pub enum MaterialAssignment {
    Uniform(MaterialSet),
    Targeted {
        base: MaterialSet,
        target: MaterialSet,
        ids: Vec<String>,
        /// Ground faces within this plan distance of a target footprint get
        /// the target ground albedo; `None` applies it to all ground.
        ground_radius: Option<f64>,
    },
}

impl MaterialAssignment {
    fn apply(&self, scene: &mut Scene, set: &BuildingSet) {
        match self {
            MaterialAssignment::Uniform(m) => scene.apply_materials(m),
            MaterialAssignment::Targeted {
                base,
                target,
                ids,
                ground_radius,
            } => {
                scene.apply_materials(base);
                let idx: BTreeSet<u32> = scene
                    .building_ids
                    .iter()
                    .enumerate()
                    .filter(|(_, id)| ids.contains(id))
                    .map(|(i, _)| i as u32)
                    .collect();
                for class in [SurfaceClass::Roof, SurfaceClass::Wall] {
                    scene.set_albedo(
                        |f| f.class == class && f.building.is_some_and(|b| idx.contains(&b)),
                        target.get(class).albedo,
                    );
                }
                let near: Vec<_> = set.buildings.iter().filter(|b| ids.contains(&b.id)).collect();
                let ground = target.ground.albedo;
                match ground_radius {
                    None => {
                        scene.set_albedo(|f| f.class == SurfaceClass::Ground, ground);
                        scene.far_ground.albedo = ground;
                    }
                    Some(r) => {
                        scene.set_albedo(
                            |f| {
                                f.class == SurfaceClass::Ground
                                    && near
                                        .iter()
                                        .any(|b| b.footprint.distance(f.centroid.x, f.centroid.y) <= *r)
                            },
                            ground,
                        );
                    }
                }
            }
        }
    }
}

/// Cached geometry-dependent products for one building set and forcing day.
pub struct SolveContext {
    pub set: BuildingSet,
    pub analyses: Analyses,
    pub forcing: Vec<HourForcing>,
    basis: Option<WindBasis>,
    scene: Option<Scene>,
    views: Vec<View>,
    ped: Option<PedestrianGrid>,
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn mkdir(p: &Path) -> Result<(), OrchestratorError> {
    std::fs::create_dir_all(p).map_err(|e| OrchestratorError::io(p, e))
}

fn stats(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (mut max, mut sum, mut n) = (f64::NEG_INFINITY, 0.0, 0usize);
    for v in values.filter(|v| v.is_finite()) {
        max = max.max(v);
        sum += v;
        n += 1;
    }
    (n > 0).then(|| (max, sum / n as f64))
}

impl SolveContext {
    /// Solves the wind basis and builds the radiation scene, view factors and
    /// pedestrian grid as the analyses require.
    pub fn prepare(
        set: BuildingSet,
        params: &ResolvedParams,
        year: i32,
        analyses: Analyses,
    ) -> Result<SolveContext, OrchestratorError> {
        let site = params.site();
        let forcing: Vec<HourForcing> = params
            .forcing
            .iter()
            .map(|f| HourForcing::from_forcing(f, &site, year))
            .collect();
        let domain = set.domain_bbox;
        let cell = params.num("cell_size");
        let seed = params.int("seed");
        let basis = if analyses.wind || analyses.radiation {
            let raster = HeightRaster::from_buildings(Grid2::covering(domain, cell), &set.buildings);
            let heights = params.list("slice_heights").to_vec();
            info!("solving wind basis at {} heights", heights.len());
            Some(WindBasis::from_raster(
                &raster,
                &heights,
                params.num("z0"),
                &solve_control(params),
            )?)
        } else {
            None
        };
        let (scene, views, ped) = if analyses.radiation {
            let scene = Scene::build(
                &set,
                domain,
                &MaterialSet::from_params(params),
                params.num("face_max_edge"),
            )?;
            let n = params.int("svf_samples") as usize;
            info!("view factors for {} faces", scene.faces.len());
            let views = scene.face_views(n, seed);
            let ped = PedestrianGrid::build(
                &scene,
                &set,
                Grid2::covering(domain, cell),
                params.num("pedestrian_height"),
                n,
                seed,
            );
            (Some(scene), views, Some(ped))
        } else {
            (None, Vec::new(), None)
        };
        Ok(SolveContext {
            set,
            analyses,
            forcing,
            basis,
            scene,
            views,
            ped,
        })
    }

    /// Runs the solvers for `params` and writes field files under
    /// `root/sub`. Probes are evaluated at `probes`; when `hotspot_probes` is
    /// set a probe is added at every ranked hotspot first. `metrics.files`
    /// lists the written files relative to `root`.
    pub fn solve(
        &mut self,
        params: &ResolvedParams,
        materials: &MaterialAssignment,
        probes: &[ProbeSpec],
        hotspot_probes: bool,
        run: RunInfo,
        root: &Path,
        sub: &str,
    ) -> Result<RunMetrics, OrchestratorError> {
        let dir = root.join(sub);
        mkdir(&dir)?;
        let mut files: Vec<PathBuf> = Vec::new();
        let ts = params.timestamp();
        let selected = self
            .forcing
            .iter()
            .find(|f| f.hour == ts.hour)
            .copied()
            .ok_or_else(|| OrchestratorError::Validation(format!("no forcing for hour {}", ts.hour)))?;

        if let Some(basis) = &self.basis {
            let wind_dir = dir.join("wind");
            mkdir(&wind_dir)?;
            let volume = basis.volume(selected.wind_speed, selected.wind_direction)?;
            files.extend(volume.write_vtk(&wind_dir)?);
        }

        let mut metrics = RunMetrics {
            schema_version: METRICS_SCHEMA_VERSION,
            run,
            buildings: Vec::new(),
            energy_ranking: Vec::new(),
            total_cooling_kwh: None,
            peak_cooling_power_w: None,
            hotspots: Vec::new(),
            peak: None,
            hourly: Vec::new(),
            probes: Vec::new(),
            files: Vec::new(),
        };

        let (Some(scene), Some(ped)) = (self.scene.as_mut(), self.ped.as_ref()) else {
            metrics.hourly = self.forcing.iter().map(|f| hour_summary(f, None, None, None)).collect();
            metrics.files = finish_files(root, files);
            return Ok(metrics);
        };
        materials.apply(scene, &self.set);
        let cfg = RadiationConfig::from_params(params);
        let result: DiurnalResult =
            simulate_day(scene, &self.views, Some(ped), &self.forcing, self.basis.as_ref(), &cfg)?;

        let surf_dir = dir.join("surfaces");
        let ped_dir = dir.join("pedestrian");
        mkdir(&surf_dir)?;
        mkdir(&ped_dir)?;
        for s in &result.surfaces {
            let p = surf_dir.join(format!("surface_{:02}.vtk", s.hour));
            write_surface_vtk(scene, s, &p)?;
            files.push(p);
        }
        let svf = ped_dir.join("svf.vtk");
        write_svf_vtk(ped, &svf)?;
        files.push(svf);

        let mut pet_fields: Vec<Vec<f64>> = Vec::new();
        if self.analyses.comfort {
            let person = PersonParams::from_params(params);
            for h in &result.pedestrian {
                let field = pet_field(h, &person)?;
                let p = ped_dir.join(format!("pet_{:02}.vtk", h.hour));
                write_pet_vtk(ped, h, &field, &p)?;
                files.push(p);
                pet_fields.push(field);
            }
            let samples: Vec<_> = result
                .pedestrian
                .iter()
                .zip(&pet_fields)
                .flat_map(|(h, f)| pet_samples(ped, h, f))
                .collect();
            let hotspots = hotspot_scan(
                &samples,
                &self.set.buildings,
                &CauseThresholds::from_params(params),
                params.int("hotspot_count") as usize,
            )?;
            let p = dir.join("hotspots.json");
            write_hotspots_json(&hotspots, &p)?;
            files.push(p);
            metrics.peak = hotspots.first().map(|h| Peak {
                pet_c: h.pet_c,
                mrt_c: h.mrt_c,
                x: h.x,
                y: h.y,
                hour: h.hour,
            });
            let mut specs: Vec<ProbeSpec> = Vec::new();
            if hotspot_probes {
                specs.extend(hotspots.iter().map(|h| ProbeSpec {
                    label: format!("{}{}", super::HOTSPOT_PROBE_PREFIX, h.rank),
                    x: h.x,
                    y: h.y,
                    hour: h.hour,
                }));
            }
            specs.extend(probes.iter().cloned());
            metrics.hotspots = hotspots;
            for s in &specs {
                let Some(k) = ped.locate(s.x, s.y) else {
                    warn!(
                        "probe {} at ({}, {}) is outside the open pedestrian grid; skipped",
                        s.label, s.x, s.y
                    );
                    continue;
                };
                let Some(hi) = result.pedestrian.iter().position(|h| h.hour == s.hour) else {
                    warn!("probe {} names hour {} outside 1..24; skipped", s.label, s.hour);
                    continue;
                };
                let h = &result.pedestrian[hi];
                metrics.probes.push(Probe {
                    label: s.label.clone(),
                    x: s.x,
                    y: s.y,
                    hour: s.hour,
                    lit: h.lit[k],
                    pet_c: pet_fields[hi][k],
                    mrt_c: h.mrt[k],
                    t_air_c: h.t_air[k],
                    wind_ms: h.wind[k],
                });
            }
        } else {
            for h in &result.pedestrian {
                let p = ped_dir.join(format!("mrt_{:02}.vtk", h.hour));
                write_pedestrian_vtk(ped, h, &p)?;
                files.push(p);
            }
        }

        let mut energies: Vec<BuildingEnergy> = Vec::new();
        if self.analyses.energy {
            let (roof, wall) = WallProps::from_params(params)?;
            energies = district_cooling_loads(scene, &result.surfaces, &self.set.buildings, &roof, &wall)?;
            let p = dir.join("building_energy.json");
            write_building_energy_json(&energies, &p)?;
            files.push(p);
            metrics.energy_ranking = energy_outliers(&energies, params.num("outlier_k"));
            metrics.total_cooling_kwh = Some(energies.iter().map(|e| e.energy_kwh).sum());
        }

        for (i, f) in self.forcing.iter().enumerate() {
            let ph = &result.pedestrian[i];
            let pet = pet_fields.get(i).map(|v| v.as_slice());
            let power = (!energies.is_empty()).then(|| energies.iter().map(|e| e.hourly_power_w[i]).sum::<f64>());
            let mut s = hour_summary(f, Some(&ph.mrt), pet, power);
            s.hour = ph.hour;
            metrics.hourly.push(s);
        }
        metrics.peak_cooling_power_w = metrics.hourly.iter().filter_map(|h| h.cooling_power_w).reduce(f64::max);
        metrics.buildings = energies;
        metrics.files = finish_files(root, files);
        Ok(metrics)
    }
}

fn finish_files(root: &Path, files: Vec<PathBuf>) -> Vec<String> {
    let mut v: Vec<String> = files.iter().map(|p| rel(root, p)).collect();
    v.sort();
    v
}

fn hour_summary(f: &HourForcing, mrt: Option<&[f64]>, pet: Option<&[f64]>, power: Option<f64>) -> HourSummary {
    let m = mrt.and_then(|v| stats(v.iter().copied()));
    let p = pet.and_then(|v| stats(v.iter().copied()));
    HourSummary {
        hour: f.hour,
        t_air_c: f.t_air,
        wind_speed_ms: f.wind_speed,
        dni_w_m2: f.dni,
        dhi_w_m2: f.dhi,
        sun_up: f.sun.is_some(),
        mrt_max_c: m.map(|s| s.0),
        mrt_mean_c: m.map(|s| s.1),
        pet_max_c: p.map(|s| s.0),
        pet_mean_c: p.map(|s| s.1),
        cooling_power_w: power,
    }
}
