use std::path::Path;

use serde::{Deserialize, Serialize};

use super::registry::check_value;
use super::source::reject_duplicate_keys;
use super::{spec, ParamError, ParamValue, ProvenanceLevel, ResolvedParam, ResolvedParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamChange {
    pub field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old: Option<ParamValue>,
    pub new: ParamValue,
    pub reason: String,
    /// Exact entry to reinstate. Set only on inverse deltas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restore: Option<ResolvedParam>,
}

/// A targeted override. Changed fields take the delta's level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDelta {
    #[serde(default = "user_level")]
    pub level: ProvenanceLevel,
    pub changes: Vec<ParamChange>,
}

fn user_level() -> ProvenanceLevel {
    ProvenanceLevel::User
}

impl ParamDelta {
    pub fn new(level: ProvenanceLevel) -> Self {
        ParamDelta {
            level,
            changes: Vec::new(),
        }
    }

    pub fn change(mut self, field: &str, old: Option<ParamValue>, new: impl Into<ParamValue>, reason: &str) -> Self {
        self.changes.push(ParamChange {
            field: field.to_string(),
            old,
            new: new.into(),
            reason: reason.to_string(),
            restore: None,
        });
        self
    }

    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
    }

    /// The delta that undoes `self` when applied to `apply_delta(base, self)`.
    pub fn inverse(&self, base: &ResolvedParams) -> Result<ParamDelta, ParamError> {
        // Step through the forward changes so repeated fields revert in turn.
        let mut state = base.fields.clone();
        let mut changes = Vec::with_capacity(self.changes.len());
        for c in &self.changes {
            let prior = state
                .get(&c.field)
                .cloned()
                .ok_or_else(|| ParamError::UnknownPath(c.field.clone()))?;
            let after = match &c.restore {
                Some(r) => r.clone(),
                None => ResolvedParam {
                    value: c.new.clone(),
                    ..prior.clone()
                },
            };
            changes.push(ParamChange {
                field: c.field.clone(),
                old: Some(after.value.clone()),
                new: prior.value.clone(),
                reason: format!("revert: {}", c.reason),
                restore: Some(prior),
            });
            state.insert(c.field.clone(), after);
        }
        changes.reverse();
        Ok(ParamDelta {
            level: self.level,
            changes,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ParamError> {
        reject_duplicate_keys(text)?;
        serde_json::from_str(text).map_err(|e| ParamError::Syntax(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ParamError> {
        let text = std::fs::read_to_string(path).map_err(|source| ParamError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("delta serializes");
        s.push('\n');
        s
    }
}

/// Returns a modified copy; `base` is untouched.
pub fn apply_delta(base: &ResolvedParams, delta: &ParamDelta) -> Result<ResolvedParams, ParamError> {
    if !matches!(delta.level, ProvenanceLevel::Advisor | ProvenanceLevel::User) {
        return Err(ParamError::DeltaLevel(delta.level));
    }
    let mut out = base.clone();
    for c in &delta.changes {
        let s = spec(&c.field).ok_or_else(|| ParamError::UnknownPath(c.field.clone()))?;
        let entry = match &c.restore {
            Some(r) => r.clone(),
            None => ResolvedParam {
                value: c.new.clone(),
                level: delta.level,
                source: "delta".to_string(),
                rationale: Some(c.reason.clone()),
            },
        };
        if let Err(message) = check_value(s, &entry.value) {
            return Err(ParamError::Invalid {
                field: c.field.clone(),
                value: entry.value,
                level: delta.level,
                source_note: "delta".into(),
                message,
            });
        }
        if let (Some(old), Some(cur)) = (&c.old, out.fields.get(&c.field)) {
            if *old != cur.value {
                return Err(ParamError::Invalid {
                    field: c.field.clone(),
                    value: cur.value.clone(),
                    level: cur.level,
                    source_note: "delta".into(),
                    message: format!("delta expects old value {old}"),
                });
            }
        }
        out.fields.insert(c.field.clone(), entry);
    }
    Ok(out)
}
