//! Material proposals and baseline-versus-mitigated comparison.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::advisor::{AdvisorRequest, AlbedoTargets, CandidateBuilding, HotspotBrief, MaterialsResponse};
use super::consult::Consultant;
use super::OrchestratorError;
use crate::geometry::BuildingSet;
use crate::outputs::{Probe, RunMetrics};
use crate::params::{ParamDelta, ParamValue, ProvenanceLevel, ResolvedParams};

pub const DELTA_SCHEMA_VERSION: u32 = 1;
/// Probe labels of the form `hotspot_<rank>` track baseline hotspots.
pub const HOTSPOT_PROBE_PREFIX: &str = "hotspot_";
/// Hotspots whose surroundings pull buildings into the target set.
const HOTSPOTS_CONSIDERED: usize = 3;

/// Parameters a delta may not touch, because the cached geometry, wind
/// field, forcing or timestamp would no longer match the baseline.
const FROZEN: &[&str] = &[
    "air_temperature",
    "relative_humidity",
    "wind_speed",
    "wind_direction",
    "ghi",
    "dni",
    "dhi",
    "latitude",
    "longitude",
    "altitude",
    "utc_offset",
    "month",
    "day",
    "hour",
    "cell_size",
    "ground_buffer_factor",
    "domain_bbox",
    "weld_tolerance",
    "face_max_edge",
    "slice_heights",
    "z0",
    "wind_solver",
    "sor_omega",
    "solver_tolerance",
    "solver_max_iters",
    "svf_samples",
    "seed",
    "pedestrian_height",
    "erbs_kt_low",
    "erbs_kt_high",
    "erbs_low_coeffs",
    "erbs_mid_coeffs",
    "erbs_high_kd",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBuilding {
    pub id: String,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundScope {
    /// Ground within `target_radius` of a target footprint.
    NearTargets {
        radius_m: f64,
    },
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialPlan {
    /// Empty means every building.
    pub targets: Vec<TargetBuilding>,
    pub all_buildings: bool,
    pub ground: GroundScope,
    pub delta: ParamDelta,
    pub rationale: String,
}

fn hotspot_briefs(m: &RunMetrics) -> Vec<HotspotBrief> {
    m.hotspots
        .iter()
        .map(|h| HotspotBrief {
            rank: h.rank,
            hour: h.hour,
            pet_c: h.pet_c,
            nearest_buildings: h.nearest_buildings.clone(),
            causes: h.causes.clone(),
        })
        .collect()
}

/// Targets the `top_n` buildings by EUI plus every building within
/// `target_radius` of the leading hotspots, and raises roof, wall and ground
/// albedo to the configured targets. The advisor may move each albedo; values
/// outside [0, 1] are rejected and the heuristic value kept.
pub fn propose_materials(
    baseline: &RunMetrics,
    params: &ResolvedParams,
    set: &BuildingSet,
    consultant: &mut Consultant,
) -> Result<MaterialPlan, OrchestratorError> {
    if baseline.buildings.is_empty() || baseline.energy_ranking.is_empty() {
        return Err(OrchestratorError::Mitigation(
            "baseline has no building energy metrics to target".into(),
        ));
    }
    let top_n = params.int("top_n") as usize;
    let radius = params.num("target_radius");
    let mut reasons: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in baseline.energy_ranking.iter().take(top_n) {
        reasons.entry(r.id.clone()).or_default().push(format!(
            "EUI rank {} ({:.2} kWh/m2{})",
            r.rank,
            r.eui_kwh_m2,
            if r.outlier { ", outlier" } else { "" }
        ));
    }
    let mut near_hotspot = BTreeSet::new();
    for h in baseline.hotspots.iter().take(HOTSPOTS_CONSIDERED) {
        for b in &set.buildings {
            let d = b.footprint.distance(h.x, h.y);
            if d <= radius {
                near_hotspot.insert(b.id.clone());
                reasons
                    .entry(b.id.clone())
                    .or_default()
                    .push(format!("{d:.1} m from hotspot {}", h.rank));
            }
        }
    }
    // Order targets by EUI rank, then id.
    let rank_of: BTreeMap<&str, usize> = baseline
        .energy_ranking
        .iter()
        .map(|r| (r.id.as_str(), r.rank))
        .collect();
    let mut ids: Vec<String> = reasons.keys().cloned().collect();
    ids.sort_by_key(|id| (rank_of.get(id.as_str()).copied().unwrap_or(usize::MAX), id.clone()));

    let heuristic = AlbedoTargets {
        roof: params.num("target_roof_albedo"),
        wall: params.num("target_wall_albedo"),
        ground: params.num("target_ground_albedo"),
    };
    let candidates = ids
        .iter()
        .map(|id| {
            let r = baseline.energy_ranking.iter().find(|r| &r.id == id);
            CandidateBuilding {
                id: id.clone(),
                eui_kwh_m2: r.map_or(0.0, |r| r.eui_kwh_m2),
                energy_kwh: r.map_or(0.0, |r| r.energy_kwh),
                outlier: r.is_some_and(|r| r.outlier),
                near_hotspot: near_hotspot.contains(id),
            }
        })
        .collect();
    let request = AdvisorRequest::Materials {
        targets: candidates,
        hotspots: hotspot_briefs(baseline),
        heuristic,
    };
    let response: MaterialsResponse = consultant.ask(&request, &|_| Ok(()))?;
    let mut delta = ParamDelta::new(ProvenanceLevel::Advisor);
    for (key, proposed, fallback) in [
        ("roof_albedo", response.albedo.roof, heuristic.roof),
        ("wall_albedo", response.albedo.wall, heuristic.wall),
        ("ground_albedo", response.albedo.ground, heuristic.ground),
    ] {
        let value = if (0.0..=1.0).contains(&proposed) {
            proposed
        } else {
            consultant.warn(format!(
                "mitigate: advisor albedo {proposed} for {key} outside [0, 1]; kept heuristic {fallback}"
            ));
            fallback
        };
        let current = params.num(key);
        if value != current {
            delta = delta.change(
                key,
                Some(ParamValue::Number(current)),
                value,
                &format!("raise reflectance, emissivity held; {}", response.rationale),
            );
        }
    }
    Ok(MaterialPlan {
        targets: ids
            .into_iter()
            .map(|id| TargetBuilding {
                rationale: reasons[&id].join("; "),
                id,
            })
            .collect(),
        all_buildings: false,
        ground: GroundScope::NearTargets { radius_m: radius },
        delta,
        rationale: response.rationale,
    })
}

/// A user-supplied delta applied to every building and all ground.
pub fn plan_from_delta(delta: ParamDelta) -> Result<MaterialPlan, OrchestratorError> {
    check_delta(&delta)?;
    Ok(MaterialPlan {
        targets: Vec::new(),
        all_buildings: true,
        ground: GroundScope::All,
        rationale: "user-supplied delta".into(),
        delta,
    })
}

pub(crate) fn check_delta(delta: &ParamDelta) -> Result<(), OrchestratorError> {
    if let Some(c) = delta.changes.iter().find(|c| FROZEN.contains(&c.field.as_str())) {
        return Err(OrchestratorError::Mitigation(format!(
            "delta changes '{}', which needs a new baseline rather than a mitigation round",
            c.field
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingDelta {
    pub id: String,
    pub before_kwh: f64,
    pub after_kwh: f64,
    pub change_kwh: f64,
    /// (before − after) / before · 100; absent when before is zero.
    pub reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDelta {
    pub label: String,
    pub x: f64,
    pub y: f64,
    pub hour: u32,
    pub lit: bool,
    pub pet_before_c: f64,
    pub pet_after_c: f64,
    pub delta_pet_c: f64,
    pub mrt_before_c: f64,
    pub mrt_after_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaMetrics {
    pub schema_version: u32,
    pub buildings: Vec<BuildingDelta>,
    pub total_before_kwh: f64,
    pub total_after_kwh: f64,
    pub total_reduction_pct: Option<f64>,
    pub peak_power_before_w: Option<f64>,
    pub peak_power_after_w: Option<f64>,
    pub peak_power_change_w: Option<f64>,
    pub hotspots: Vec<ProbeDelta>,
    pub probes: Vec<ProbeDelta>,
    /// Mean ΔPET over hotspots lit by direct sun at their hour.
    pub lit_hotspot_mean_delta_pet_c: Option<f64>,
    pub penalty_threshold_c: f64,
    pub albedo_penalty: bool,
}

fn reduction(before: f64, after: f64) -> Option<f64> {
    (before > 0.0).then(|| (before - after) / before * 100.0)
}

fn probe_delta(a: &Probe, b: &Probe) -> ProbeDelta {
    ProbeDelta {
        label: a.label.clone(),
        x: a.x,
        y: a.y,
        hour: a.hour,
        lit: a.lit,
        pet_before_c: a.pet_c,
        pet_after_c: b.pet_c,
        delta_pet_c: b.pet_c - a.pet_c,
        mrt_before_c: a.mrt_c,
        mrt_after_c: b.mrt_c,
    }
}

/// Deltas between two runs on the same geometry, timestamp and seed. The
/// albedo penalty is set when the mean ΔPET at sun-lit hotspots exceeds
/// `threshold` while total cooling energy fell.
pub fn compare_runs(
    baseline: &RunMetrics,
    mitigated: &RunMetrics,
    threshold: f64,
) -> Result<DeltaMetrics, OrchestratorError> {
    let (a, b) = (&baseline.run, &mitigated.run);
    if (a.month, a.day, a.hour, a.seed) != (b.month, b.day, b.hour, b.seed) || a.domain_bbox_m != b.domain_bbox_m {
        return Err(OrchestratorError::Mismatch(
            "runs differ in timestamp, seed or domain".into(),
        ));
    }
    let ids_a: BTreeSet<&str> = baseline.buildings.iter().map(|e| e.id.as_str()).collect();
    let ids_b: BTreeSet<&str> = mitigated.buildings.iter().map(|e| e.id.as_str()).collect();
    if ids_a != ids_b || a.building_count != b.building_count {
        return Err(OrchestratorError::Mismatch(format!(
            "building sets differ: {:?} vs {:?}",
            ids_a, ids_b
        )));
    }
    let mut buildings: Vec<BuildingDelta> = baseline
        .buildings
        .iter()
        .map(|e| {
            let after = mitigated.buildings.iter().find(|m| m.id == e.id).expect("same ids");
            BuildingDelta {
                id: e.id.clone(),
                before_kwh: e.energy_kwh,
                after_kwh: after.energy_kwh,
                change_kwh: after.energy_kwh - e.energy_kwh,
                reduction_pct: reduction(e.energy_kwh, after.energy_kwh),
            }
        })
        .collect();
    buildings.sort_by(|x, y| x.id.cmp(&y.id));
    let total_before: f64 = baseline.buildings.iter().map(|e| e.energy_kwh).sum();
    let total_after: f64 = mitigated.buildings.iter().map(|e| e.energy_kwh).sum();

    let (mut hotspots, mut probes) = (Vec::new(), Vec::new());
    for p in &baseline.probes {
        let q =
            mitigated.probes.iter().find(|q| q.label == p.label).ok_or_else(|| {
                OrchestratorError::Mismatch(format!("probe {} missing from the mitigated run", p.label))
            })?;
        if (q.x, q.y, q.hour) != (p.x, p.y, p.hour) {
            return Err(OrchestratorError::Mismatch(format!("probe {} moved", p.label)));
        }
        let d = probe_delta(p, q);
        if p.label.starts_with(HOTSPOT_PROBE_PREFIX) {
            hotspots.push(d);
        } else {
            probes.push(d);
        }
    }
    let lit: Vec<f64> = hotspots.iter().filter(|h| h.lit).map(|h| h.delta_pet_c).collect();
    let lit_mean = (!lit.is_empty()).then(|| lit.iter().sum::<f64>() / lit.len() as f64);
    let albedo_penalty = lit_mean.is_some_and(|m| m > threshold) && total_after < total_before;
    let peak_change = match (baseline.peak_cooling_power_w, mitigated.peak_cooling_power_w) {
        (Some(x), Some(y)) => Some(y - x),
        _ => None,
    };
    Ok(DeltaMetrics {
        schema_version: DELTA_SCHEMA_VERSION,
        buildings,
        total_before_kwh: total_before,
        total_after_kwh: total_after,
        total_reduction_pct: reduction(total_before, total_after),
        peak_power_before_w: baseline.peak_cooling_power_w,
        peak_power_after_w: mitigated.peak_cooling_power_w,
        peak_power_change_w: peak_change,
        hotspots,
        probes,
        lit_hotspot_mean_delta_pet_c: lit_mean,
        penalty_threshold_c: threshold,
        albedo_penalty,
    })
}
