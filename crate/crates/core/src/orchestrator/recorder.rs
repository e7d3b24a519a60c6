//! Durable log of every advisor exchange: a JSON array and a verbose text log,
//! both synced to disk after each append.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::OrchestratorError;

pub const STRUCTURED_LOG: &str = "llm_interactions.json";
pub const VERBOSE_LOG: &str = "llm_interactions.log";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub stage: String,
    pub advisor: String,
    pub prompt: String,
    pub response: String,
    pub latency_ms: f64,
    pub timestamp: String,
}

#[derive(Debug)]
pub struct InteractionRecorder {
    dir: PathBuf,
    records: Vec<InteractionRecord>,
}

fn io_err(path: &Path, e: std::io::Error) -> OrchestratorError {
    OrchestratorError::Recorder(format!("{}: {e}", path.display()))
}

impl InteractionRecorder {
    /// Creates both logs empty (`[]` and a zero-length text file).
    pub fn open(dir: &Path) -> Result<Self, OrchestratorError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let rec = InteractionRecorder {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        };
        rec.write_structured()?;
        let verbose = dir.join(VERBOSE_LOG);
        File::create(&verbose)
            .and_then(|f| f.sync_all())
            .map_err(|e| io_err(&verbose, e))?;
        Ok(rec)
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn write_structured(&self) -> Result<(), OrchestratorError> {
        let path = self.dir.join(STRUCTURED_LOG);
        let tmp = self.dir.join(format!("{STRUCTURED_LOG}.tmp"));
        let text = serde_json::to_string_pretty(&self.records).expect("records serialize") + "\n";
        let mut f = File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(text.as_bytes())
            .and_then(|_| f.sync_all())
            .map_err(|e| io_err(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))
    }

    /// Appends one exchange to both logs and syncs them before returning.
    pub fn record(
        &mut self,
        stage: &str,
        advisor: &str,
        prompt: &str,
        response: &str,
        latency_ms: f64,
    ) -> Result<(), OrchestratorError> {
        let rec = InteractionRecord {
            stage: stage.to_string(),
            advisor: advisor.to_string(),
            prompt: prompt.to_string(),
            response: response.to_string(),
            latency_ms,
            timestamp: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        };
        self.records.push(rec.clone());
        self.write_structured()?;
        let path = self.dir.join(VERBOSE_LOG);
        let block = format!(
            "=== [{}] stage={} advisor={} latency={:.1} ms\n--- prompt\n{}\n--- response\n{}\n\n",
            rec.timestamp, rec.stage, rec.advisor, rec.latency_ms, rec.prompt, rec.response
        );
        let mut f = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        f.write_all(block.as_bytes())
            .and_then(|_| f.sync_all())
            .map_err(|e| io_err(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_logs_exist() {
        let dir = tempfile::tempdir().unwrap();
        let r = InteractionRecorder::open(dir.path()).unwrap();
        assert!(r.is_empty());
        let v: Vec<InteractionRecord> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(STRUCTURED_LOG)).unwrap()).unwrap();
        assert!(v.is_empty());
        assert_eq!(std::fs::read_to_string(dir.path().join(VERBOSE_LOG)).unwrap(), "");
    }

    #[test]
    fn each_record_is_on_disk_immediately() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = InteractionRecorder::open(dir.path()).unwrap();
        r.record("intent", "deterministic", "{\"q\":1}", "{}", 0.5).unwrap();
        let v: Vec<InteractionRecord> =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(STRUCTURED_LOG)).unwrap()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].stage, "intent");
        assert_eq!(v[0].prompt, "{\"q\":1}");
        r.record("report", "deterministic", "p", "r", 1.0).unwrap();
        let log = std::fs::read_to_string(dir.path().join(VERBOSE_LOG)).unwrap();
        assert_eq!(log.matches("=== [").count(), 2);
    }

    #[test]
    fn unwritable_directory_fails() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, "x").unwrap();
        assert!(InteractionRecorder::open(&file.join("sub")).is_err());
    }
}
