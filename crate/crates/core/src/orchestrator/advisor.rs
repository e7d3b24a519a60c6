//! Advisor contract: strict JSON requests and responses, a rule-based
//! implementation and an HTTP chat-completion client.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const ENV_ADVISOR_URL: &str = "MICROCLIMATE_ADVISOR_URL";
pub const ENV_ADVISOR_MODEL: &str = "MICROCLIMATE_ADVISOR_MODEL";
pub const ENV_ADVISOR_KEY: &str = "MICROCLIMATE_ADVISOR_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Analyses {
    pub wind: bool,
    pub radiation: bool,
    pub comfort: bool,
    pub energy: bool,
    pub mitigation: bool,
}

impl Analyses {
    pub fn any(&self) -> bool {
        self.wind || self.radiation || self.comfort || self.energy || self.mitigation
    }

    /// Adds the analyses each requested one depends on.
    pub fn closed(mut self) -> Analyses {
        if self.mitigation {
            self.comfort = true;
            self.energy = true;
        }
        if self.comfort || self.energy {
            self.radiation = true;
        }
        if self.radiation {
            self.wind = true;
        }
        self
    }

    pub fn names(&self) -> Vec<String> {
        [
            ("wind", self.wind),
            ("radiation", self.radiation),
            ("comfort", self.comfort),
            ("energy", self.energy),
            ("mitigation", self.mitigation),
        ]
        .iter()
        .filter(|(_, on)| *on)
        .map(|(n, _)| n.to_string())
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestedTimestamp {
    pub month: u32,
    pub day: u32,
    pub hour: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlbedoTargets {
    pub roof: f64,
    pub wall: f64,
    pub ground: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateBuilding {
    pub id: String,
    pub eui_kwh_m2: f64,
    pub energy_kwh: f64,
    pub outlier: bool,
    pub near_hotspot: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotspotBrief {
    pub rank: usize,
    pub hour: u32,
    pub pet_c: f64,
    pub nearest_buildings: Vec<String>,
    pub causes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportBrief {
    pub analyses: Vec<String>,
    pub hotspots: Vec<HotspotBrief>,
    pub outliers: Vec<String>,
    pub mitigated: bool,
    pub albedo_penalty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdvisorRequest {
    Intent {
        query: String,
        /// Parameter keys the advisor may suggest values for.
        allowed_parameters: Vec<String>,
    },
    Materials {
        targets: Vec<CandidateBuilding>,
        hotspots: Vec<HotspotBrief>,
        heuristic: AlbedoTargets,
    },
    Report {
        summary: ReportBrief,
    },
}

impl AdvisorRequest {
    pub fn stage(&self) -> &'static str {
        match self {
            AdvisorRequest::Intent { .. } => "intent",
            AdvisorRequest::Materials { .. } => "mitigate",
            AdvisorRequest::Report { .. } => "report",
        }
    }

    /// Human-readable description of the response schema, sent to remote models.
    pub fn response_schema(&self) -> &'static str {
        match self {
            AdvisorRequest::Intent { .. } => {
                r#"{"analyses":{"wind":bool,"radiation":bool,"comfort":bool,"energy":bool,"mitigation":bool},"timestamp":{"month":int,"day":int,"hour":int}|null,"parameters":{"<allowed key>":value},"rationale":string}"#
            }
            AdvisorRequest::Materials { .. } => {
                r#"{"albedo":{"roof":number,"wall":number,"ground":number},"rationale":string}"#
            }
            AdvisorRequest::Report { .. } => {
                r#"{"recommendations":[{"category":"materials"|"shading"|"ventilation","text":string}]}"#
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentResponse {
    pub analyses: Analyses,
    pub timestamp: Option<SuggestedTimestamp>,
    #[serde(default)]
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsResponse {
    pub albedo: AlbedoTargets,
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Materials,
    Shading,
    Ventilation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recommendation {
    pub category: Category,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportResponse {
    pub recommendations: Vec<Recommendation>,
}

/// Anything that turns a JSON request into a JSON response.
pub trait Advisor {
    fn name(&self) -> &str;
    fn complete(&mut self, request: &str, schema: &str) -> Result<String, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AdvisorMode {
    /// Keyword rules only; no advisor calls and empty interaction logs.
    Off,
    #[default]
    Deterministic,
    Remote,
}

/// Representative days: keywords, audit day, mitigation day.
const SEASONS: [(&[&str], (u32, u32), (u32, u32)); 3] = [
    (&["inter-monsoon", "intermonsoon", "inter monsoon"], (4, 20), (4, 15)),
    (
        &["northeast monsoon", "north-east monsoon", "ne monsoon"],
        (1, 15),
        (1, 15),
    ),
    (
        &["southwest monsoon", "south-west monsoon", "sw monsoon"],
        (7, 15),
        (7, 15),
    ),
];

/// Hour reported for a representative day: the 12:00-13:00 interval.
const REPRESENTATIVE_HOUR: u32 = 13;

fn contains_any(text: &str, words: &[&str]) -> bool {
    words.iter().any(|w| text.contains(w))
}

/// Keyword rules shared by the deterministic advisor and advisor-free runs.
pub fn keyword_intent(query: &str) -> IntentResponse {
    let q = query.to_lowercase();
    let word = |w: &str| q.split(|c: char| !c.is_alphanumeric()).any(|t| t == w);
    let analyses = Analyses {
        wind: contains_any(&q, &["wind", "cfd", "airflow", "air flow", "ventilation"]),
        radiation: contains_any(&q, &["solar", "radiation", "shadow", "shade", "mrt", "irradiance"]),
        comfort: contains_any(&q, &["comfort", "thermal stress", "heat stress", "hotspot", "hot spot"]) || word("pet"),
        energy: contains_any(&q, &["energy", "cooling", "inefficien", "load"]) || word("eui"),
        mitigation: contains_any(
            &q,
            &[
                "material",
                "albedo",
                "emissivity",
                "mitigat",
                "retrofit",
                "intervention",
            ],
        ),
    };
    let season = SEASONS.iter().find(|(keys, _, _)| contains_any(&q, keys));
    let timestamp = season.map(|(_, audit, mitigation)| {
        let (month, day) = if analyses.mitigation { *mitigation } else { *audit };
        SuggestedTimestamp {
            month,
            day,
            hour: REPRESENTATIVE_HOUR,
        }
    });
    let mut rationale = format!("keyword rules selected [{}]", analyses.names().join(", "));
    if let Some(t) = timestamp {
        rationale.push_str(&format!("; representative day {:02}-{:02}", t.month, t.day));
    }
    IntentResponse {
        analyses,
        timestamp,
        parameters: BTreeMap::new(),
        rationale,
    }
}

/// Rule-based advisor. Pure function of the request text.
#[derive(Debug, Default, Clone)]
pub struct DeterministicAdvisor;

impl DeterministicAdvisor {
    fn materials(targets: &[CandidateBuilding], heuristic: AlbedoTargets) -> MaterialsResponse {
        let ids: Vec<&str> = targets.iter().map(|t| t.id.as_str()).collect();
        MaterialsResponse {
            albedo: heuristic,
            rationale: format!(
                "raise roof, wall and ground reflectance for {} with emissivity unchanged",
                if ids.is_empty() {
                    "no buildings".to_string()
                } else {
                    ids.join(", ")
                }
            ),
        }
    }

    fn report(s: &ReportBrief) -> ReportResponse {
        let mut recs = Vec::new();
        if !s.outliers.is_empty() {
            recs.push(Recommendation {
                category: Category::Materials,
                text: format!(
                    "Prioritise cool-roof and reflective facade retrofits on {}, the energy-use outliers.",
                    s.outliers.join(", ")
                ),
            });
        }
        let has = |tag: &str| s.hotspots.iter().any(|h| h.causes.iter().any(|c| c == tag));
        let near: Vec<String> = {
            let mut v: Vec<String> = s.hotspots.iter().flat_map(|h| h.nearest_buildings.clone()).collect();
            v.sort();
            v.dedup();
            v
        };
        let around = if near.is_empty() {
            "the ranked hotspots".to_string()
        } else {
            format!("hotspots near {}", near.join(", "))
        };
        if has("high svf") || has("reflected gain") {
            recs.push(Recommendation {
                category: Category::Shading,
                text: format!("Add tree canopy or shade structures over {around} to cut direct and reflected sun."),
            });
        }
        if has("low wind") {
            recs.push(Recommendation {
                category: Category::Ventilation,
                text: format!("Open wind corridors or raise permeability around {around}, where air movement is weak."),
            });
        }
        if s.albedo_penalty {
            recs.push(Recommendation {
                category: Category::Materials,
                text: "Keep high-albedo finishes on roofs; limit reflective ground and low wall finishes in sunlit pedestrian areas, where reflected shortwave raises PET.".to_string(),
            });
        } else if !s.mitigated {
            recs.push(Recommendation {
                category: Category::Materials,
                text: "Test high-albedo roof finishes first; they lower envelope gains without adding reflected load at street level.".to_string(),
            });
        }
        recs.sort_by_key(|r| r.category);
        ReportResponse { recommendations: recs }
    }
}

impl Advisor for DeterministicAdvisor {
    fn name(&self) -> &str {
        "deterministic"
    }

    fn complete(&mut self, request: &str, _schema: &str) -> Result<String, String> {
        let req: AdvisorRequest = serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))?;
        let body = match req {
            AdvisorRequest::Intent { query, .. } => serde_json::to_value(keyword_intent(&query)),
            AdvisorRequest::Materials { targets, heuristic, .. } => {
                serde_json::to_value(Self::materials(&targets, heuristic))
            }
            AdvisorRequest::Report { summary } => serde_json::to_value(Self::report(&summary)),
        }
        .map_err(|e| e.to_string())?;
        Ok(body.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Chat-completion endpoint URL.
    pub endpoint: String,
    pub model: String,
    pub timeout_s: f64,
}

impl RemoteConfig {
    /// Endpoint and model from the environment; the key is read per call.
    pub fn from_env() -> Result<RemoteConfig, String> {
        let endpoint = std::env::var(ENV_ADVISOR_URL).map_err(|_| format!("{ENV_ADVISOR_URL} is not set"))?;
        Ok(RemoteConfig {
            endpoint,
            model: std::env::var(ENV_ADVISOR_MODEL).unwrap_or_else(|_| "gpt-4o-mini".to_string()),
            timeout_s: 60.0,
        })
    }
}

/// Chat-completion client: the request goes in a user message and the
/// first choice's message content is returned.
pub struct RemoteAdvisor {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteAdvisor {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s.max(0.001))))
            .build()
            .into();
        RemoteAdvisor { config, agent }
    }
}

impl Advisor for RemoteAdvisor {
    fn name(&self) -> &str {
        "remote"
    }

    fn complete(&mut self, request: &str, schema: &str) -> Result<String, String> {
        let system = format!(
            "You advise an urban microclimate simulation pipeline. Reply with one JSON object and nothing else, \
             matching exactly this schema: {schema}. Free text is allowed only in rationale or text fields."
        );
        let body = serde_json::json!({
            "model": self.config.model,
            "temperature": 0,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": request},
            ],
        });
        let mut req = self.agent.post(&self.config.endpoint);
        if let Ok(key) = std::env::var(ENV_ADVISOR_KEY) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| e.to_string())?;
        let doc: serde_json::Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        doc.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}
