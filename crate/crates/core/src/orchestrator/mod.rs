//! The five-stage pipeline (intent, geometry, params, solve, optional
//! mitigation, report) around a single state object, with every advisor
//! exchange logged to disk.

mod advisor;
mod consult;
mod intent;
mod mitigation;
mod pipeline;
mod recorder;
mod report;
mod solve;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use advisor::{
    keyword_intent, Advisor, AdvisorMode, AdvisorRequest, AlbedoTargets, Analyses, CandidateBuilding, Category,
    DeterministicAdvisor, HotspotBrief, IntentResponse, MaterialsResponse, Recommendation, RemoteAdvisor, RemoteConfig,
    ReportBrief, ReportResponse, SuggestedTimestamp, ENV_ADVISOR_KEY, ENV_ADVISOR_MODEL, ENV_ADVISOR_URL,
};
pub use consult::Consultant;
pub use intent::{analyze_intent, IntentPlan};
pub use mitigation::{
    compare_runs, plan_from_delta, propose_materials, BuildingDelta, DeltaMetrics, GroundScope, MaterialPlan,
    ProbeDelta, TargetBuilding, DELTA_SCHEMA_VERSION, HOTSPOT_PROBE_PREFIX,
};
pub use pipeline::{
    run_pipeline, run_pipeline_with, MitigationRound, PipelineState, RunConfig, StageFailure, StageManifest,
    MANIFEST_FILE, METRICS_FILE, REPORT_FILE, SNAPSHOT_FILE,
};
pub use recorder::{InteractionRecord, InteractionRecorder, STRUCTURED_LOG, VERBOSE_LOG};
pub use report::{draft_report, fmt_energy, fmt_pct, fmt_pet};
pub use solve::{MaterialAssignment, ProbeSpec, SolveContext};

use crate::comfort_energy::ComfortError;
use crate::geometry::GeometryError;
use crate::outputs::OutputError;
use crate::params::ParamError;
use crate::radiation::RadiationError;
use crate::weather::WeatherError;
use crate::windflow::WindError;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Intent,
    Geometry,
    Params,
    Solve,
    Mitigate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Intent,
        Stage::Geometry,
        Stage::Params,
        Stage::Solve,
        Stage::Mitigate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Intent => "intent",
            Stage::Geometry => "geometry",
            Stage::Params => "params",
            Stage::Solve => "solve",
            Stage::Mitigate => "mitigate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("interaction log: {0}")]
    Recorder(String),
    #[error("empty query")]
    EmptyQuery,
    #[error("advisor ({stage}): {message}")]
    Advisor { stage: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Weather(#[from] WeatherError),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("parameter validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error(transparent)]
    Radiation(#[from] RadiationError),
    #[error(transparent)]
    Comfort(#[from] ComfortError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("mitigation: {0}")]
    Mitigation(String),
    #[error("cannot compare runs: {0}")]
    Mismatch(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl OrchestratorError {
    pub(crate) fn io(path: &std::path::Path, e: impl fmt::Display) -> Self {
        OrchestratorError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}
