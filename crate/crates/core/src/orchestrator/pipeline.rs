//! Stage sequencing. One `PipelineState` moves through the stages; the first
//! failure is recorded and the report stage still runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use super::advisor::{
    Advisor, AdvisorMode, AdvisorRequest, Recommendation, RemoteAdvisor, RemoteConfig, ReportBrief, ReportResponse,
};
use super::consult::Consultant;
use super::intent::{analyze_intent, IntentPlan};
use super::mitigation::{check_delta, compare_runs, plan_from_delta, propose_materials, DeltaMetrics, MaterialPlan};
use super::report::draft_report;
use super::solve::{MaterialAssignment, ProbeSpec, SolveContext};
use super::{OrchestratorError, Stage, STRUCTURED_LOG, VERBOSE_LOG};
use crate::geometry::{build_index, render_index_map, write_building_index, BuildingSet, GeometryConfig};
use crate::outputs::{write_json, write_metrics, RunInfo, RunMetrics};
use crate::params::{
    apply_delta, load_partial, merge, merge_forcing, validate, ParamDelta, PartialParams, ProvenanceLevel,
    ResolvedParams,
};
use crate::radiation::MaterialSet;
use crate::weather::{parse_epw, select_day, RealtimeClient, RealtimeConfig, Timestamp, WeatherField};

pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const REPORT_FILE: &str = "report.md";
pub const SNAPSHOT_FILE: &str = "params_snapshot.json";
pub const PARTIAL_SNAPSHOT_FILE: &str = "params_snapshot.partial.json";
pub const DELTA_FILE: &str = "delta_metrics.json";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub query: String,
    pub geometry_dir: PathBuf,
    pub climate_path: PathBuf,
    /// Replaces the built-in defaults when set.
    pub defaults_path: Option<PathBuf>,
    /// User-level overrides.
    pub overrides_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// User-level seed; wins over the overrides file.
    pub seed: Option<u64>,
    pub advisor: AdvisorMode,
    pub remote: Option<RemoteConfig>,
    /// Run the mitigation stage even if the query does not ask for it.
    pub mitigate: bool,
    pub rounds: u32,
    /// User delta that replaces the material proposal.
    pub delta_path: Option<PathBuf>,
    /// Extra PET/MRT probe points.
    pub probes: Vec<ProbeSpec>,
    pub realtime: RealtimeConfig,
}

impl RunConfig {
    pub fn new(
        query: impl Into<String>,
        geometry_dir: impl Into<PathBuf>,
        climate_path: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        RunConfig {
            query: query.into(),
            geometry_dir: geometry_dir.into(),
            climate_path: climate_path.into(),
            defaults_path: None,
            overrides_path: None,
            out_dir: out_dir.into(),
            seed: None,
            advisor: AdvisorMode::Deterministic,
            remote: None,
            mitigate: false,
            rounds: 1,
            delta_path: None,
            probes: Vec::new(),
            realtime: RealtimeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub message: String,
}

/// What one stage wrote, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageManifest {
    pub stage: Stage,
    pub files: Vec<String>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MitigationRound {
    pub round: u32,
    pub dir: String,
    pub plan: MaterialPlan,
    #[serde(skip)]
    pub params: ResolvedParams,
    #[serde(skip)]
    pub metrics: RunMetrics,
    #[serde(skip)]
    pub delta: DeltaMetrics,
}

/// The single object threaded through every stage.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineState {
    pub query: String,
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub timestamp: Option<Timestamp>,
    pub intent: Option<IntentPlan>,
    #[serde(skip)]
    pub buildings: Option<BuildingSet>,
    #[serde(skip)]
    pub params: Option<ResolvedParams>,
    pub stages: Vec<StageManifest>,
    #[serde(skip)]
    pub baseline: Option<RunMetrics>,
    pub rounds: Vec<MitigationRound>,
    #[serde(skip)]
    pub delta: Option<DeltaMetrics>,
    pub error: Option<StageFailure>,
    /// Written when the params stage fails after the preliminary merge.
    pub partial_snapshot: Option<String>,
    pub recommendations: Vec<Recommendation>,
    pub warnings: Vec<String>,
    pub advisor: String,
    pub advisor_calls: usize,
    pub logged_interactions: usize,
}

impl PipelineState {
    fn new(config: &RunConfig) -> Self {
        PipelineState {
            query: config.query.clone(),
            out_dir: config.out_dir.clone(),
            timestamp: None,
            intent: None,
            buildings: None,
            params: None,
            stages: Vec::new(),
            baseline: None,
            rounds: Vec::new(),
            delta: None,
            error: None,
            partial_snapshot: None,
            recommendations: Vec::new(),
            warnings: Vec::new(),
            advisor: config.advisor_label(),
            advisor_calls: 0,
            logged_interactions: 0,
        }
    }

    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }

    /// Every output file named by a stage manifest, sorted and unique.
    pub fn files(&self) -> Vec<String> {
        let mut v: Vec<String> = self.stages.iter().flat_map(|s| s.files.iter().cloned()).collect();
        v.sort();
        v.dedup();
        v
    }

    fn push(&mut self, stage: Stage, files: Vec<String>, summary: BTreeMap<String, serde_json::Value>) {
        self.stages.push(StageManifest { stage, files, summary });
    }
}

impl RunConfig {
    fn advisor_label(&self) -> String {
        match self.advisor {
            AdvisorMode::Off => "off",
            AdvisorMode::Deterministic => "deterministic",
            AdvisorMode::Remote => "remote",
        }
        .to_string()
    }
}

/// Runs the pipeline with the advisor selected by `config.advisor`.
pub fn run_pipeline(config: &RunConfig) -> PipelineState {
    run_pipeline_with(config, None)
}

/// Runs the pipeline; `advisor` replaces the configured primary advisor.
pub fn run_pipeline_with(config: &RunConfig, advisor: Option<Box<dyn Advisor>>) -> PipelineState {
    let mut state = PipelineState::new(config);
    if let Err(e) = std::fs::create_dir_all(&config.out_dir) {
        state.error = Some(StageFailure {
            stage: Stage::Intent,
            message: format!("{}: {e}", config.out_dir.display()),
        });
        return state;
    }
    let primary = match (config.advisor, advisor) {
        (_, Some(a)) => Ok(Some(a)),
        (AdvisorMode::Remote, None) => config
            .remote
            .clone()
            .map_or_else(RemoteConfig::from_env, Ok)
            .map(|c| Some(Box::new(RemoteAdvisor::new(c)) as Box<dyn Advisor>))
            .map_err(|message| OrchestratorError::Advisor {
                stage: "setup".into(),
                message,
            }),
        _ => Ok(None),
    };
    let consultant = primary.and_then(|p| Consultant::new(config.advisor, p, &config.out_dir));
    let mut consultant = match consultant {
        Ok(c) => c,
        Err(e) => {
            state.error = Some(StageFailure {
                stage: Stage::Intent,
                message: e.to_string(),
            });
            finish_report(&mut state, None);
            return state;
        }
    };
    if let Err(failure) = run_stages(config, &mut state, &mut consultant) {
        log::error!("{} stage failed: {}", failure.stage, failure.message);
        state.error = Some(failure);
    }
    finish_report(&mut state, Some(&mut consultant));
    state
}

fn at(stage: Stage) -> impl Fn(OrchestratorError) -> StageFailure {
    move |e| StageFailure {
        stage,
        message: e.to_string(),
    }
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn summary<const N: usize>(items: [(&str, serde_json::Value); N]) -> BTreeMap<String, serde_json::Value> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

struct Sources {
    defaults: PartialParams,
    user: PartialParams,
    advisor: PartialParams,
}

fn load_sources(config: &RunConfig, intent: &IntentPlan) -> Result<Sources, OrchestratorError> {
    let defaults = match &config.defaults_path {
        Some(p) => load_partial(p, ProvenanceLevel::Default)?,
        None => PartialParams::defaults(),
    };
    let mut user = match &config.overrides_path {
        Some(p) => load_partial(p, ProvenanceLevel::User)?,
        None => PartialParams::new(ProvenanceLevel::User),
    };
    if let Some(seed) = config.seed {
        user.set("seed", seed as f64, "command line");
    }
    Ok(Sources {
        defaults,
        user,
        advisor: intent.parameters.clone(),
    })
}

fn run_stages(config: &RunConfig, state: &mut PipelineState, consultant: &mut Consultant) -> Result<(), StageFailure> {
    let out = config.out_dir.clone();

    // Intent.
    info!("stage intent");
    let mut intent = analyze_intent(&config.query, consultant).map_err(at(Stage::Intent))?;
    if config.mitigate {
        intent.analyses.mitigation = true;
        intent.analyses = intent.analyses.closed();
    }
    state.push(
        Stage::Intent,
        vec![STRUCTURED_LOG.to_string(), VERBOSE_LOG.to_string()],
        summary([
            ("analyses", serde_json::json!(intent.analyses.names())),
            ("rationale", serde_json::json!(intent.rationale)),
        ]),
    );
    state.intent = Some(intent.clone());

    // Geometry, configured from a merge without climate or realtime sources,
    // which never carry geometry settings.
    info!("stage geometry");
    let sources = load_sources(config, &intent).map_err(at(Stage::Geometry))?;
    let empty_climate = PartialParams::new(ProvenanceLevel::Climate);
    let empty_realtime = PartialParams::new(ProvenanceLevel::Realtime);
    let prelim = merge(
        &sources.defaults,
        &empty_climate,
        &empty_realtime,
        &sources.advisor,
        &sources.user,
    )
    .map_err(|e| at(Stage::Geometry)(e.into()))?;
    state.timestamp = Some(prelim.timestamp());
    let geo_config = GeometryConfig {
        weld_tolerance: prelim.num("weld_tolerance"),
        cell_size: prelim.num("cell_size"),
        buffer_factor: prelim.num("ground_buffer_factor"),
        domain: prelim.domain_bbox(),
        ..GeometryConfig::default()
    };
    let set = geometry_stage(&config.geometry_dir, &geo_config, &out).map_err(at(Stage::Geometry))?;
    state.push(
        Stage::Geometry,
        vec![
            "geometry/building_index.json".into(),
            "geometry/building_index.svg".into(),
        ],
        summary([
            ("building_count", serde_json::json!(set.buildings.len())),
            ("domain_bbox_m", serde_json::json!(set.domain_bbox)),
        ]),
    );
    state.buildings = Some(set.clone());

    // Params.
    info!("stage params");
    let (params, year) = match params_stage(config, &sources) {
        Ok(v) => v,
        Err(e) => {
            let path = out.join(PARTIAL_SNAPSHOT_FILE);
            if std::fs::write(&path, prelim.to_json()).is_ok() {
                state.partial_snapshot = Some(PARTIAL_SNAPSHOT_FILE.to_string());
            }
            return Err(at(Stage::Params)(e));
        }
    };
    params
        .snapshot(&out.join(SNAPSHOT_FILE))
        .map_err(|e| at(Stage::Params)(e.into()))?;
    state.timestamp = Some(params.timestamp());
    state.push(
        Stage::Params,
        vec![SNAPSHOT_FILE.to_string()],
        summary([
            ("timestamp", serde_json::json!(params.timestamp().to_string())),
            ("field_count", serde_json::json!(params.fields.len())),
        ]),
    );
    state.params = Some(params.clone());

    // Solve.
    info!("stage solve");
    let ts = params.timestamp();
    let run_info = RunInfo {
        query: config.query.clone(),
        month: ts.month,
        day: ts.day,
        hour: ts.hour,
        seed: params.int("seed"),
        analyses: intent.analyses.names(),
        building_count: set.buildings.len(),
        domain_bbox_m: set.domain_bbox,
        cell_size_m: params.num("cell_size"),
    };
    let mut ctx = SolveContext::prepare(set.clone(), &params, year, intent.analyses).map_err(at(Stage::Solve))?;
    let mut baseline = ctx
        .solve(
            &params,
            &MaterialAssignment::Uniform(MaterialSet::from_params(&params)),
            &config.probes,
            true,
            run_info.clone(),
            &out,
            "",
        )
        .map_err(at(Stage::Solve))?;
    baseline
        .files
        .extend(state.files().into_iter().filter(|f| !f.starts_with("llm_")));
    baseline.files.sort();
    baseline.files.dedup();
    write_metrics(&baseline, &out.join(METRICS_FILE)).map_err(|e| at(Stage::Solve)(e.into()))?;
    let mut files = baseline.files.clone();
    files.push(METRICS_FILE.into());
    files.sort();
    state.push(
        Stage::Solve,
        files,
        summary([
            ("total_cooling_kwh", serde_json::json!(baseline.total_cooling_kwh)),
            ("peak_pet_c", serde_json::json!(baseline.peak.map(|p| p.pet_c))),
        ]),
    );
    state.baseline = Some(baseline.clone());

    // Mitigation.
    if intent.analyses.mitigation {
        if config.rounds == 0 {
            consultant.warn("mitigate: --rounds 0, baseline only".into());
        }
        info!("stage mitigate");
        mitigate_stage(config, state, consultant, &mut ctx, &params, &baseline, run_info)
            .map_err(at(Stage::Mitigate))?;
    }
    Ok(())
}

fn geometry_stage(dir: &Path, config: &GeometryConfig, out: &Path) -> Result<BuildingSet, OrchestratorError> {
    let set = build_index(dir, config)?;
    let gdir = out.join("geometry");
    std::fs::create_dir_all(&gdir).map_err(|e| OrchestratorError::io(&gdir, e))?;
    write_building_index(&set, gdir.join("building_index.json"))?;
    render_index_map(&set, gdir.join("building_index.svg"))?;
    Ok(set)
}

fn params_stage(config: &RunConfig, s: &Sources) -> Result<(ResolvedParams, i32), OrchestratorError> {
    let prelim = merge(
        &s.defaults,
        &PartialParams::new(ProvenanceLevel::Climate),
        &PartialParams::new(ProvenanceLevel::Realtime),
        &s.advisor,
        &s.user,
    )?;
    let ts = prelim.timestamp();
    let epw = parse_epw(&config.climate_path)?;
    let mut day = select_day(&epw.records, ts.month, ts.day)?;
    let erbs = prelim.erbs();
    for r in &mut day {
        r.fill_irradiance(&epw.site, &erbs);
    }
    let year = day.first().map_or(2000, |r| r.year);
    let source = format!("climate file {}", config.climate_path.display());
    let mut climate = PartialParams::new(ProvenanceLevel::Climate);
    if let Some(r) = day.iter().find(|r| r.timestamp.hour == ts.hour) {
        for f in WeatherField::ALL {
            if let Some(v) = r.get(f) {
                climate.set(f.key(), v, &source);
            }
        }
    }
    climate
        .set("latitude", epw.site.latitude, &source)
        .set("longitude", epw.site.longitude, &source)
        .set("altitude", epw.site.altitude, &source)
        .set("utc_offset", epw.site.utc_offset, &source);

    let reading = RealtimeClient::new(config.realtime.clone()).fetch(&epw.site);
    let mut realtime = PartialParams::new(ProvenanceLevel::Realtime);
    for (f, v) in &reading.values {
        realtime.set(f.key(), *v, "realtime service");
    }

    let mut params = merge(&s.defaults, &climate, &realtime, &s.advisor, &s.user)?;
    params.forcing = merge_forcing(&day, &s.defaults, &realtime, &s.advisor, &s.user)?;
    validate(&params)
        .map_err(|v| OrchestratorError::Validation(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")))?;
    Ok((params, year))
}

fn mitigate_stage(
    config: &RunConfig,
    state: &mut PipelineState,
    consultant: &mut Consultant,
    ctx: &mut SolveContext,
    base_params: &ResolvedParams,
    baseline: &RunMetrics,
    run_info: RunInfo,
) -> Result<(), OrchestratorError> {
    let out = &config.out_dir;
    let probes: Vec<ProbeSpec> = baseline.probes.iter().map(ProbeSpec::from).collect();
    let threshold = base_params.num("penalty_threshold");
    let mut last_params = base_params.clone();
    let mut last_metrics = baseline.clone();
    let mut targets: Vec<String> = Vec::new();
    for round in 1..=config.rounds {
        let plan = match &config.delta_path {
            Some(_) if round > 1 => {
                consultant.warn("mitigate: a user delta is applied once; further rounds skipped".into());
                break;
            }
            Some(p) => plan_from_delta(ParamDelta::load(p)?)?,
            None => propose_materials(&last_metrics, &last_params, &ctx.set, consultant)?,
        };
        if plan.delta.is_empty() {
            consultant.warn(format!("mitigate: round {round} proposes no change; stopping"));
            break;
        }
        check_delta(&plan.delta)?;
        let params = apply_delta(&last_params, &plan.delta)?;
        validate(&params).map_err(|v| {
            OrchestratorError::Validation(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "))
        })?;
        for t in &plan.targets {
            if !targets.contains(&t.id) {
                targets.push(t.id.clone());
            }
        }
        let assignment = if plan.all_buildings {
            MaterialAssignment::Uniform(MaterialSet::from_params(&params))
        } else {
            MaterialAssignment::Targeted {
                base: MaterialSet::from_params(base_params),
                target: MaterialSet::from_params(&params),
                ids: targets.clone(),
                ground_radius: match plan.ground {
                    super::GroundScope::All => None,
                    super::GroundScope::NearTargets { radius_m } => Some(radius_m),
                },
            }
        };
        let sub = format!("round_{round}");
        let dir = out.join(&sub);
        std::fs::create_dir_all(&dir).map_err(|e| OrchestratorError::io(&dir, e))?;
        params.snapshot(&dir.join(SNAPSHOT_FILE))?;
        write_json(&plan, &dir.join("material_plan.json"))?;
        let mut metrics = ctx.solve(&params, &assignment, &probes, false, run_info.clone(), out, &sub)?;
        metrics.files.push(format!("{sub}/{SNAPSHOT_FILE}"));
        metrics.files.push(format!("{sub}/material_plan.json"));
        metrics.files.sort();
        write_metrics(&metrics, &dir.join(METRICS_FILE))?;
        let delta = compare_runs(baseline, &metrics, threshold)?;
        write_json(&delta, &dir.join(DELTA_FILE))?;
        let mut files = metrics.files.clone();
        files.push(format!("{sub}/{METRICS_FILE}"));
        files.push(format!("{sub}/{DELTA_FILE}"));
        files.sort();
        state.push(
            Stage::Mitigate,
            files,
            summary([
                ("round", serde_json::json!(round)),
                ("total_reduction_pct", serde_json::json!(delta.total_reduction_pct)),
                ("albedo_penalty", serde_json::json!(delta.albedo_penalty)),
            ]),
        );
        state.rounds.push(MitigationRound {
            round,
            dir: sub,
            plan,
            params: params.clone(),
            metrics: metrics.clone(),
            delta: delta.clone(),
        });
        last_params = params;
        last_metrics = metrics;
    }
    if let Some(delta) = state.rounds.last().map(|r| r.delta.clone()) {
        write_json(&delta, &out.join(DELTA_FILE))?;
        state.push(Stage::Mitigate, vec![DELTA_FILE.to_string()], BTreeMap::new());
        state.delta = Some(delta);
    }
    Ok(())
}

fn report_brief(state: &PipelineState) -> Option<ReportBrief> {
    let b = state.baseline.as_ref()?;
    Some(ReportBrief {
        analyses: b.run.analyses.clone(),
        hotspots: b
            .hotspots
            .iter()
            .map(|h| super::advisor::HotspotBrief {
                rank: h.rank,
                hour: h.hour,
                pet_c: h.pet_c,
                nearest_buildings: h.nearest_buildings.clone(),
                causes: h.causes.clone(),
            })
            .collect(),
        outliers: b
            .energy_ranking
            .iter()
            .filter(|r| r.outlier)
            .map(|r| r.id.clone())
            .collect(),
        mitigated: state.delta.is_some(),
        albedo_penalty: state.delta.as_ref().is_some_and(|d| d.albedo_penalty),
    })
}

/// Report stage: recommendations, manifest, then `report.md`.
fn finish_report(state: &mut PipelineState, consultant: Option<&mut Consultant>) {
    let out = state.out_dir.clone();
    if let Some(c) = consultant {
        if state.error.is_none() {
            if let Some(brief) = report_brief(state) {
                let req = AdvisorRequest::Report { summary: brief };
                match c.ask::<ReportResponse>(&req, &|_| Ok(())) {
                    Ok(r) => state.recommendations = r.recommendations,
                    Err(e) => c.warn(format!("report: no recommendations ({e})")),
                }
            }
        }
        state.warnings = c.warnings().to_vec();
        state.advisor_calls = c.calls();
        state.logged_interactions = c.recorder().len();
    }
    let mut files = vec![REPORT_FILE.to_string(), MANIFEST_FILE.to_string()];
    if out.join(STRUCTURED_LOG).exists() {
        files.push(STRUCTURED_LOG.into());
        files.push(VERBOSE_LOG.into());
    }
    if let Some(p) = &state.partial_snapshot {
        files.push(p.clone());
    }
    files.sort();
    state.push(Stage::Report, files, BTreeMap::new());
    let manifest_path = out.join(MANIFEST_FILE);
    if let Err(e) = write_json(&*state, &manifest_path) {
        log::error!("{}: {e}", manifest_path.display());
    }
    let text = draft_report(state);
    let report_path = out.join(REPORT_FILE);
    if let Err(e) = std::fs::write(&report_path, text) {
        log::error!("{}: {e}", rel(&out, &report_path));
    }
}
