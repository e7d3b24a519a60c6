//! Partial parameter sources and their JSON form.
//!
//! A source file is a flat object. Each entry is either a bare value or
//! `{"value": v, "rationale": "...", "source": "..."}`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};

use super::{spec, ParamError, ParamValue, ProvenanceLevel};

/// Built-in defaults covering every registered parameter.
pub const DEFAULTS_JSON: &str = include_str!("../../data/defaults.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialEntry {
    pub value: ParamValue,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

/// Values offered by one source at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialParams {
    pub level: ProvenanceLevel,
    pub entries: BTreeMap<String, PartialEntry>,
}

impl PartialParams {
    pub fn new(level: ProvenanceLevel) -> Self {
        PartialParams {
            level,
            entries: BTreeMap::new(),
        }
    }

    pub fn defaults() -> Self {
        parse_partial(DEFAULTS_JSON, ProvenanceLevel::Default, "built-in defaults").expect("built-in defaults parse")
    }

    pub fn set(&mut self, key: &str, value: impl Into<ParamValue>, source: &str) -> &mut Self {
        self.entries.insert(
            key.to_string(),
            PartialEntry {
                value: value.into(),
                source: source.to_string(),
                rationale: None,
            },
        );
        self
    }

    pub fn set_with_rationale(
        &mut self,
        key: &str,
        value: impl Into<ParamValue>,
        source: &str,
        rationale: &str,
    ) -> &mut Self {
        self.set(key, value, source);
        if let Some(e) = self.entries.get_mut(key) {
            e.rationale = Some(rationale.to_string());
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Bare(ParamValue),
    Full {
        value: ParamValue,
        #[serde(default)]
        rationale: Option<String>,
        #[serde(default)]
        source: Option<String>,
    },
}

/// Parses a partial source. Duplicate keys and unregistered names are errors.
pub fn parse_partial(text: &str, level: ProvenanceLevel, source_note: &str) -> Result<PartialParams, ParamError> {
    reject_duplicate_keys(text)?;
    let raw: BTreeMap<String, RawEntry> = serde_json::from_str(text).map_err(|e| ParamError::Json {
        path: source_note.into(),
        source: e,
    })?;
    let mut out = PartialParams::new(level);
    for (key, entry) in raw {
        if spec(&key).is_none() {
            return Err(ParamError::UnknownField { field: key, level });
        }
        let (value, rationale, source) = match entry {
            RawEntry::Bare(v) => (v, None, None),
            RawEntry::Full {
                value,
                rationale,
                source,
            } => (value, rationale, source),
        };
        out.entries.insert(
            key,
            PartialEntry {
                value,
                source: source.unwrap_or_else(|| source_note.to_string()),
                rationale,
            },
        );
    }
    Ok(out)
}

pub fn load_partial(path: &Path, level: ProvenanceLevel) -> Result<PartialParams, ParamError> {
    let text = std::fs::read_to_string(path).map_err(|source| ParamError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_partial(&text, level, &path.display().to_string())
}

/// Walks a JSON document and fails on the first object with a repeated key.
/// `serde_json` otherwise keeps the last occurrence silently.
pub(crate) fn reject_duplicate_keys(text: &str) -> Result<(), ParamError> {
    struct Check;
    struct CheckVisitor;

    impl<'de> Deserialize<'de> for Check {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            d.deserialize_any(CheckVisitor)
        }
    }

    impl<'de> Visitor<'de> for CheckVisitor {
        type Value = Check;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("any JSON value")
        }

        fn visit_bool<E>(self, _: bool) -> Result<Check, E> {
            Ok(Check)
        }
        fn visit_i64<E>(self, _: i64) -> Result<Check, E> {
            Ok(Check)
        }
        fn visit_u64<E>(self, _: u64) -> Result<Check, E> {
            Ok(Check)
        }
        fn visit_f64<E>(self, _: f64) -> Result<Check, E> {
            Ok(Check)
        }
        fn visit_str<E>(self, _: &str) -> Result<Check, E> {
            Ok(Check)
        }
        fn visit_unit<E>(self) -> Result<Check, E> {
            Ok(Check)
        }

        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Check, A::Error> {
            while seq.next_element::<Check>()?.is_some() {}
            Ok(Check)
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Check, A::Error> {
            let mut seen = HashSet::new();
            while let Some(key) = map.next_key::<String>()? {
                if !seen.insert(key.clone()) {
                    return Err(de::Error::custom(format!("\u{0}dup:{key}")));
                }
                map.next_value::<Check>()?;
            }
            Ok(Check)
        }
    }

    match serde_json::from_str::<Check>(text) {
        Ok(_) => Ok(()),
        Err(e) => {
            let msg = e.to_string();
            match msg.split_once("\u{0}dup:") {
                Some((_, rest)) => {
                    let key = rest.rsplit_once(" at line").map_or(rest, |(k, _)| k);
                    Err(ParamError::DuplicateKey(key.to_string()))
                }
                None => Err(ParamError::Syntax(msg)),
            }
        }
    }
}
