//! Advisor calls with schema checks, one retry, deterministic fallback and
//! a log entry per call.

use std::path::Path;
use std::time::Instant;

use log::warn;
use serde::de::DeserializeOwned;

use super::advisor::{Advisor, AdvisorMode, AdvisorRequest, DeterministicAdvisor};
use super::recorder::InteractionRecorder;
use super::OrchestratorError;

pub struct Consultant {
    mode: AdvisorMode,
    primary: Box<dyn Advisor>,
    recorder: InteractionRecorder,
    calls: usize,
    warnings: Vec<String>,
}

fn parse<T: DeserializeOwned>(text: &str, check: &dyn Fn(&T) -> Result<(), String>) -> Result<T, String> {
    let value: T = serde_json::from_str(text.trim()).map_err(|e| format!("schema violation: {e}"))?;
    check(&value)?;
    Ok(value)
}

impl Consultant {
    /// Opens the interaction logs in `log_dir`. `primary` defaults to the
    /// deterministic advisor.
    pub fn new(
        mode: AdvisorMode,
        primary: Option<Box<dyn Advisor>>,
        log_dir: &Path,
    ) -> Result<Self, OrchestratorError> {
        Ok(Consultant {
            mode,
            primary: primary.unwrap_or_else(|| Box::new(DeterministicAdvisor)),
            recorder: InteractionRecorder::open(log_dir)?,
            calls: 0,
            warnings: Vec::new(),
        })
    }

    pub fn mode(&self) -> AdvisorMode {
        self.mode
    }

    pub fn advisor_name(&self) -> &str {
        match self.mode {
            AdvisorMode::Off => "off",
            _ => self.primary.name(),
        }
    }

    /// Advisor invocations so far, fallbacks included.
    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn recorder(&self) -> &InteractionRecorder {
        &self.recorder
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn warn(&mut self, message: String) {
        warn!("{message}");
        self.warnings.push(message);
    }

    fn call(
        &mut self,
        advisor: &mut dyn Advisor,
        label: &str,
        stage: &str,
        prompt: &str,
        schema: &str,
    ) -> Result<Result<String, String>, OrchestratorError> {
        let t0 = Instant::now();
        let result = advisor.complete(prompt, schema);
        let latency_ms = t0.elapsed().as_secs_f64() * 1e3;
        self.calls += 1;
        let logged = match &result {
            Ok(text) => text.clone(),
            Err(e) => format!("ERROR: {e}"),
        };
        self.recorder.record(stage, label, prompt, &logged, latency_ms)?;
        Ok(result)
    }

    /// Sends `request` and returns the parsed, checked response. A remote
    /// advisor gets two attempts before the deterministic advisor answers
    /// instead. With the advisor off the keyword rules run without logging.
    pub fn ask<T: DeserializeOwned>(
        &mut self,
        request: &AdvisorRequest,
        check: &dyn Fn(&T) -> Result<(), String>,
    ) -> Result<T, OrchestratorError> {
        let stage = request.stage();
        let prompt = serde_json::to_string(request).expect("request serializes");
        let schema = request.response_schema();
        let fail = |message: String| OrchestratorError::Advisor {
            stage: stage.to_string(),
            message,
        };
        if self.mode == AdvisorMode::Off {
            let text = DeterministicAdvisor.complete(&prompt, schema).map_err(fail)?;
            return parse(&text, check).map_err(fail);
        }
        let deterministic = self.primary.name() == DeterministicAdvisor.name();
        let attempts = if deterministic { 1 } else { 2 };
        let mut last = String::new();
        let mut primary = std::mem::replace(&mut self.primary, Box::new(DeterministicAdvisor));
        let name = primary.name().to_string();
        let mut outcome = None;
        for _ in 0..attempts {
            let r = self.call(primary.as_mut(), &name, stage, &prompt, schema);
            let r = match r {
                Ok(r) => r,
                Err(e) => {
                    self.primary = primary;
                    return Err(e);
                }
            };
            match r.and_then(|text| parse(&text, check)) {
                Ok(v) => {
                    outcome = Some(v);
                    break;
                }
                Err(e) => last = e,
            }
        }
        self.primary = primary;
        if let Some(v) = outcome {
            return Ok(v);
        }
        if deterministic {
            return Err(fail(last));
        }
        self.warn(format!(
            "{stage}: {name} advisor failed twice ({last}); using the deterministic advisor"
        ));
        let text = self
            .call(
                &mut DeterministicAdvisor,
                "deterministic-fallback",
                stage,
                &prompt,
                schema,
            )?
            .map_err(fail)?;
        parse(&text, check).map_err(fail)
    }
}

#[cfg(test)]
mod tests {
    use super::super::advisor::{IntentResponse, MaterialsResponse};
    use super::*;

    /// Replays canned responses in order.
    struct Scripted(Vec<Result<String, String>>);

    impl Advisor for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }
        fn complete(&mut self, _: &str, _: &str) -> Result<String, String> {
            if self.0.is_empty() {
                Err("exhausted".into())
            } else {
                self.0.remove(0)
            }
        }
    }

    fn intent_request(q: &str) -> AdvisorRequest {
        AdvisorRequest::Intent {
            query: q.into(),
            allowed_parameters: vec![],
        }
    }

    fn any_analysis(r: &IntentResponse) -> Result<(), String> {
        if r.analyses.any() {
            Ok(())
        } else {
            Err("no analysis derivable".into())
        }
    }

    #[test]
    fn schema_violation_retries_then_falls_back() {
        let dir = tempfile::tempdir().unwrap();
        let bad = Scripted(vec![Ok("not json".into()), Ok("{\"analyses\":1}".into())]);
        let mut c = Consultant::new(AdvisorMode::Remote, Some(Box::new(bad)), dir.path()).unwrap();
        let r: IntentResponse = c.ask(&intent_request("cooling energy audit"), &any_analysis).unwrap();
        assert!(r.analyses.energy);
        assert_eq!(c.calls(), 3);
        assert_eq!(c.recorder().len(), 3);
        assert_eq!(c.recorder().records()[2].advisor, "deterministic-fallback");
        assert_eq!(c.warnings().len(), 1);
    }

    #[test]
    fn valid_remote_answer_is_used_once() {
        let dir = tempfile::tempdir().unwrap();
        let good = r#"{"albedo":{"roof":0.7,"wall":0.5,"ground":0.3},"rationale":"ok"}"#;
        let mut c = Consultant::new(
            AdvisorMode::Remote,
            Some(Box::new(Scripted(vec![Ok(good.into())]))),
            dir.path(),
        )
        .unwrap();
        let req = AdvisorRequest::Materials {
            targets: vec![],
            hotspots: vec![],
            heuristic: super::super::advisor::AlbedoTargets {
                roof: 0.65,
                wall: 0.6,
                ground: 0.4,
            },
        };
        let r: MaterialsResponse = c.ask(&req, &|_| Ok(())).unwrap();
        assert_eq!(r.albedo.roof, 0.7);
        assert_eq!((c.calls(), c.recorder().len()), (1, 1));
    }

    #[test]
    fn hello_fails_after_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Consultant::new(AdvisorMode::Remote, Some(Box::new(Scripted(vec![]))), dir.path()).unwrap();
        let r: Result<IntentResponse, _> = c.ask(&intent_request("hello"), &any_analysis);
        assert!(r.unwrap_err().to_string().contains("no analysis derivable"));
        assert_eq!(c.calls(), c.recorder().len());
    }

    #[test]
    fn off_mode_logs_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Consultant::new(AdvisorMode::Off, None, dir.path()).unwrap();
        let r: IntentResponse = c.ask(&intent_request("PET comfort"), &any_analysis).unwrap();
        assert!(r.analyses.comfort);
        assert_eq!((c.calls(), c.recorder().len()), (0, 0));
        assert_eq!(
            std::fs::read_to_string(dir.path().join("llm_interactions.json"))
                .unwrap()
                .trim(),
            "[]"
        );
    }
}
