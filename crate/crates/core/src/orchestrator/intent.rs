//! Stage 1: which analyses to run, when, and any advisor-level parameters.

use serde::Serialize;

use super::advisor::{AdvisorRequest, Analyses, IntentResponse};
use super::consult::Consultant;
use super::OrchestratorError;
use crate::params::registry::check_value;
use crate::params::{spec, ParamValue, PartialParams, ProvenanceLevel, REGISTRY};
use crate::weather::Timestamp;

/// Keys the advisor may not set through the parameter map; the timestamp has
/// its own field.
const RESERVED: [&str; 3] = ["month", "day", "hour"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentPlan {
    pub analyses: Analyses,
    /// Advisor-level suggestions, timestamp included.
    #[serde(skip)]
    pub parameters: PartialParams,
    pub timestamp: Option<Timestamp>,
    pub rationale: String,
}

fn check(r: &IntentResponse) -> Result<(), String> {
    if !r.analyses.any() {
        return Err("no analysis derivable from the query".into());
    }
    if let Some(t) = r.timestamp {
        Timestamp::new(t.month, t.day, t.hour).map_err(|e| format!("bad timestamp: {e}"))?;
    }
    Ok(())
}

pub fn analyze_intent(query: &str, consultant: &mut Consultant) -> Result<IntentPlan, OrchestratorError> {
    if query.trim().is_empty() {
        return Err(OrchestratorError::EmptyQuery);
    }
    let allowed: Vec<String> = REGISTRY
        .iter()
        .map(|s| s.key)
        .filter(|k| !RESERVED.contains(k))
        .map(str::to_string)
        .collect();
    let request = AdvisorRequest::Intent {
        query: query.to_string(),
        allowed_parameters: allowed,
    };
    let r: IntentResponse = consultant.ask(&request, &check)?;
    let source = format!("{} advisor", consultant.advisor_name());
    let mut parameters = PartialParams::new(ProvenanceLevel::Advisor);
    for (key, raw) in &r.parameters {
        let verdict = match spec(key) {
            None => Err("unknown parameter".to_string()),
            Some(_) if RESERVED.contains(&key.as_str()) => Err("set through the timestamp field".to_string()),
            Some(s) => serde_json::from_value::<ParamValue>(raw.clone())
                .map_err(|e| e.to_string())
                .and_then(|v| check_value(s, &v).map(|_| v)),
        };
        match verdict {
            Ok(v) => {
                parameters.set_with_rationale(key, v, &source, &r.rationale);
            }
            Err(e) => consultant.warn(format!("intent: dropped advisor parameter {key} = {raw}: {e}")),
        }
    }
    let timestamp = r.timestamp.map(|t| Timestamp {
        month: t.month,
        day: t.day,
        hour: t.hour,
    });
    if let Some(t) = timestamp {
        for (k, v) in [("month", t.month), ("day", t.day), ("hour", t.hour)] {
            parameters.set_with_rationale(k, v as f64, &source, &r.rationale);
        }
    }
    Ok(IntentPlan {
        analyses: r.analyses.closed(),
        parameters,
        timestamp,
        rationale: r.rationale,
    })
}
