//! Parameter governance: five prioritized sources merged into one resolved
//! set with per-field provenance, range validation, JSON snapshots and
//! reversible deltas.

mod delta;
mod merge;
pub mod registry;
mod source;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use delta::{apply_delta, ParamChange, ParamDelta};
pub use merge::{merge, merge_forcing, validate, Violation};
pub use registry::{spec, ParamSpec, REGISTRY};
pub use source::{load_partial, parse_partial, PartialEntry, PartialParams, DEFAULTS_JSON};

use crate::weather::{ErbsCoefficients, SiteLocation, Timestamp, WeatherField};

pub const SCHEMA_VERSION: u32 = 1;

/// Source rank. Numeric values follow the documented order; see
/// [`ProvenanceLevel::precedence`] for how merge actually ranks them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceLevel {
    Default = 1,
    Climate = 2,
    Realtime = 3,
    Advisor = 4,
    User = 5,
}

impl ProvenanceLevel {
    pub const ALL: [ProvenanceLevel; 5] = [
        ProvenanceLevel::Default,
        ProvenanceLevel::Climate,
        ProvenanceLevel::Realtime,
        ProvenanceLevel::Advisor,
        ProvenanceLevel::User,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProvenanceLevel::Default => "default",
            ProvenanceLevel::Climate => "climate",
            ProvenanceLevel::Realtime => "realtime",
            ProvenanceLevel::Advisor => "advisor",
            ProvenanceLevel::User => "user",
        }
    }

    /// Effective merge rank: user over climate over realtime over advisor
    /// over default. The advisor only fills what measured sources left unset.
    pub fn precedence(self) -> u8 {
        match self {
            ProvenanceLevel::Default => 0,
            ProvenanceLevel::Advisor => 1,
            ProvenanceLevel::Realtime => 2,
            ProvenanceLevel::Climate => 3,
            ProvenanceLevel::User => 4,
        }
    }
}

impl fmt::Display for ProvenanceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Number(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::List(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        ParamValue::List(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParam {
    pub value: ParamValue,
    pub level: ProvenanceLevel,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

/// One hour of forcing with per-field provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingHour {
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    pub values: BTreeMap<String, ForcingValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForcingValue {
    pub value: f64,
    pub level: ProvenanceLevel,
}

impl ForcingHour {
    pub fn get(&self, field: WeatherField) -> f64 {
        self.values[field.key()].value
    }

    pub fn timestamp(&self) -> Timestamp {
        Timestamp {
            month: self.month,
            day: self.day,
            hour: self.hour,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParamError {
    #[error("defaults incomplete: missing {0:?}")]
    IncompleteDefaults(Vec<String>),
    #[error("unknown parameter '{field}' in {level} source")]
    UnknownField { field: String, level: ProvenanceLevel },
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("invalid value {value} for '{field}' from {level} ({source_note}): {message}")]
    Invalid {
        field: String,
        value: ParamValue,
        level: ProvenanceLevel,
        source_note: String,
        message: String,
    },
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("unknown field path '{0}'")]
    UnknownPath(String),
    #[error("delta level must be advisor or user, got {0}")]
    DeltaLevel(ProvenanceLevel),
    #[error("unsupported snapshot schema version {0}")]
    SchemaVersion(u32),
    #[error("snapshot invalid: {0}")]
    Snapshot(String),
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Every governed parameter after merge, each with exactly one level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolvedParams {
    pub fields: BTreeMap<String, ResolvedParam>,
    pub forcing: Vec<ForcingHour>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnapshotDoc {
    schema_version: u32,
    fields: BTreeMap<String, ResolvedParam>,
    #[serde(default)]
    forcing: Vec<ForcingHour>,
}

impl ResolvedParams {
    pub fn get(&self, key: &str) -> Option<&ResolvedParam> {
        self.fields.get(key)
    }

    pub fn level(&self, key: &str) -> Option<ProvenanceLevel> {
        self.fields.get(key).map(|p| p.level)
    }

    /// Numeric parameter. Panics if the key is absent or not a number; merged
    /// and reloaded sets are complete and type-checked, so this only fires on
    /// a hand-built set.
    pub fn num(&self, key: &str) -> f64 {
        match self.fields.get(key).map(|p| &p.value) {
            Some(ParamValue::Number(v)) => *v,
            other => panic!("parameter '{key}' is not a number: {other:?}"),
        }
    }

    pub fn list(&self, key: &str) -> &[f64] {
        match self.fields.get(key).map(|p| &p.value) {
            Some(ParamValue::List(v)) => v,
            other => panic!("parameter '{key}' is not a list: {other:?}"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.fields.get(key).map(|p| &p.value) {
            Some(ParamValue::Text(v)) => v,
            other => panic!("parameter '{key}' is not text: {other:?}"),
        }
    }

    pub fn int(&self, key: &str) -> u64 {
        self.num(key) as u64
    }

    pub fn timestamp(&self) -> Timestamp {
        Timestamp {
            month: self.int("month") as u32,
            day: self.int("day") as u32,
            hour: self.int("hour") as u32,
        }
    }

    pub fn site(&self) -> SiteLocation {
        SiteLocation {
            name: String::new(),
            latitude: self.num("latitude"),
            longitude: self.num("longitude"),
            altitude: self.num("altitude"),
            utc_offset: self.num("utc_offset"),
        }
    }

    pub fn erbs(&self) -> ErbsCoefficients {
        let low = self.list("erbs_low_coeffs");
        let mid = self.list("erbs_mid_coeffs");
        ErbsCoefficients {
            kt_low: self.num("erbs_kt_low"),
            kt_high: self.num("erbs_kt_high"),
            low: [low[0], low[1]],
            mid: [mid[0], mid[1], mid[2], mid[3], mid[4]],
            high: self.num("erbs_high_kd"),
        }
    }

    pub fn domain_bbox(&self) -> Option<[f64; 4]> {
        match self.list("domain_bbox") {
            [a, b, c, d] => Some([*a, *b, *c, *d]),
            _ => None,
        }
    }

    /// Snapshot text: sorted keys, explicit level names, trailing newline.
    pub fn to_json(&self) -> String {
        let doc = SnapshotDoc {
            schema_version: SCHEMA_VERSION,
            fields: self.fields.clone(),
            forcing: self.forcing.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("snapshot serializes");
        s.push('\n');
        s
    }

    /// Parses snapshot text, rejecting duplicate keys, unknown fields and
    /// values that fail validation.
    pub fn from_json(text: &str) -> Result<Self, ParamError> {
        source::reject_duplicate_keys(text)?;
        let doc: SnapshotDoc = serde_json::from_str(text).map_err(|e| ParamError::Snapshot(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(ParamError::SchemaVersion(doc.schema_version));
        }
        let params = ResolvedParams {
            fields: doc.fields,
            forcing: doc.forcing,
        };
        let missing: Vec<String> = REGISTRY
            .iter()
            .filter(|s| !params.fields.contains_key(s.key))
            .map(|s| s.key.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(ParamError::Snapshot(format!("missing fields {missing:?}")));
        }
        if let Some(k) = params.fields.keys().find(|k| spec(k).is_none()) {
            return Err(ParamError::Snapshot(format!("unknown field '{k}'")));
        }
        if let Err(v) = validate(&params) {
            return Err(ParamError::Snapshot(
                v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
            ));
        }
        Ok(params)
    }

    pub fn snapshot(&self, path: &Path) -> Result<(), ParamError> {
        std::fs::write(path, self.to_json()).map_err(|source| ParamError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_snapshot(path: &Path) -> Result<Self, ParamError> {
        let text = std::fs::read_to_string(path).map_err(|source| ParamError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_order_and_names() {
        assert!(ProvenanceLevel::User > ProvenanceLevel::Advisor);
        assert!(ProvenanceLevel::Default < ProvenanceLevel::Climate);
        assert_eq!(ProvenanceLevel::Realtime as u8, 3);
        assert_eq!(serde_json::to_string(&ProvenanceLevel::Climate).unwrap(), "\"climate\"");
        assert!(ProvenanceLevel::Climate.precedence() > ProvenanceLevel::Advisor.precedence());
        assert!(ProvenanceLevel::User.precedence() > ProvenanceLevel::Climate.precedence());
    }

    #[test]
    fn value_json_shapes() {
        let v: ParamValue = serde_json::from_str("[2, 10]").unwrap();
        assert_eq!(v, ParamValue::List(vec![2.0, 10.0]));
        let v: ParamValue = serde_json::from_str("0.2").unwrap();
        assert_eq!(v, ParamValue::Number(0.2));
        let v: ParamValue = serde_json::from_str("\"sor\"").unwrap();
        assert_eq!(v, ParamValue::Text("sor".into()));
    }
}
