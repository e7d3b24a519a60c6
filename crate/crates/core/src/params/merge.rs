use std::collections::BTreeMap;
use std::fmt;

use super::registry::check_value;
use super::{
    spec, ForcingHour, ForcingValue, ParamError, ParamValue, PartialParams, ProvenanceLevel, ResolvedParam,
    ResolvedParams, REGISTRY,
};
use crate::weather::{check_date, WeatherField, WeatherRecord};

/// Merges the five sources field by field. User wins outright; otherwise
/// climate, then realtime, then the advisor, then defaults.
pub fn merge(
    defaults: &PartialParams,
    climate: &PartialParams,
    realtime: &PartialParams,
    advisor: &PartialParams,
    user: &PartialParams,
) -> Result<ResolvedParams, ParamError> {
    let missing: Vec<String> = REGISTRY
        .iter()
        .filter(|s| !defaults.entries.contains_key(s.key))
        .map(|s| s.key.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ParamError::IncompleteDefaults(missing));
    }
    let sources = ordered_sources(defaults, climate, realtime, advisor, user);
    for (level, src) in &sources {
        if let Some(k) = src.entries.keys().find(|k| spec(k).is_none()) {
            return Err(ParamError::UnknownField {
                field: k.clone(),
                level: *level,
            });
        }
    }

    let mut fields = BTreeMap::new();
    for s in REGISTRY {
        let (level, entry) = sources
            .iter()
            .find_map(|(lvl, src)| src.entries.get(s.key).map(|e| (*lvl, e)))
            .expect("defaults are complete");
        if let Err(message) = check_value(s, &entry.value) {
            return Err(ParamError::Invalid {
                field: s.key.to_string(),
                value: entry.value.clone(),
                level,
                source_note: entry.source.clone(),
                message,
            });
        }
        fields.insert(
            s.key.to_string(),
            ResolvedParam {
                value: entry.value.clone(),
                level,
                source: entry.source.clone(),
                rationale: entry.rationale.clone(),
            },
        );
    }
    Ok(ResolvedParams {
        fields,
        forcing: Vec::new(),
    })
}

/// Sources in the order merge consults them.
fn ordered_sources<'a>(
    defaults: &'a PartialParams,
    climate: &'a PartialParams,
    realtime: &'a PartialParams,
    advisor: &'a PartialParams,
    user: &'a PartialParams,
) -> Vec<(ProvenanceLevel, &'a PartialParams)> {
    let mut v = vec![
        (ProvenanceLevel::Default, defaults),
        (ProvenanceLevel::Climate, climate),
        (ProvenanceLevel::Realtime, realtime),
        (ProvenanceLevel::Advisor, advisor),
        (ProvenanceLevel::User, user),
    ];
    v.sort_by_key(|(l, _)| std::cmp::Reverse(l.precedence()));
    v
}

/// Applies the same precedence hour by hour over a day of climate records.
/// Weather fields absent from a record fall through to realtime, advisor and
/// defaults exactly as in [`merge`].
pub fn merge_forcing(
    day: &[WeatherRecord],
    defaults: &PartialParams,
    realtime: &PartialParams,
    advisor: &PartialParams,
    user: &PartialParams,
) -> Result<Vec<ForcingHour>, ParamError> {
    let mut out = Vec::with_capacity(day.len());
    for r in day {
        let mut climate = PartialParams::new(ProvenanceLevel::Climate);
        for f in WeatherField::ALL {
            if let Some(v) = r.get(f) {
                climate.set(f.key(), v, "climate file");
            }
        }
        let sources = ordered_sources(defaults, &climate, realtime, advisor, user);
        let mut values = BTreeMap::new();
        for f in WeatherField::ALL {
            let (level, entry) = sources
                .iter()
                .find_map(|(lvl, src)| src.entries.get(f.key()).map(|e| (*lvl, e)))
                .ok_or_else(|| ParamError::IncompleteDefaults(vec![f.key().to_string()]))?;
            let value = match &entry.value {
                ParamValue::Number(v) if f.in_range(*v) => *v,
                other => {
                    return Err(ParamError::Invalid {
                        field: f.key().to_string(),
                        value: other.clone(),
                        level,
                        source_note: entry.source.clone(),
                        message: format!("out of range at hour {}", r.timestamp),
                    })
                }
            };
            values.insert(f.key().to_string(), ForcingValue { value, level });
        }
        out.push(ForcingHour {
            month: r.timestamp.month,
            day: r.timestamp.day,
            hour: r.timestamp.hour,
            values,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub value: Option<ParamValue>,
    pub level: Option<ProvenanceLevel>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)?;
        if let (Some(v), Some(l)) = (&self.value, self.level) {
            write!(f, " (value {v} from {l})")?;
        }
        Ok(())
    }
}

/// Range and consistency checks. Collects every violation; never panics.
pub fn validate(params: &ResolvedParams) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    for s in REGISTRY {
        match params.fields.get(s.key) {
            None => out.push(Violation {
                field: s.key.to_string(),
                value: None,
                level: None,
                message: "missing".into(),
            }),
            Some(p) => {
                if let Err(message) = check_value(s, &p.value) {
                    out.push(Violation {
                        field: s.key.to_string(),
                        value: Some(p.value.clone()),
                        level: Some(p.level),
                        message,
                    });
                }
            }
        }
    }
    let num = |k: &str| params.fields.get(k).and_then(|p| p.value.as_f64());
    if let (Some(m), Some(d)) = (num("month"), num("day")) {
        if m.fract() == 0.0 && d.fract() == 0.0 && (1.0..=12.0).contains(&m) && check_date(m as u32, d as u32).is_err()
        {
            out.push(Violation {
                field: "day".into(),
                value: Some(ParamValue::Number(d)),
                level: params.fields.get("day").map(|p| p.level),
                message: format!("no day {d} in month {m}"),
            });
        }
    }
    if let (Some(lo), Some(hi)) = (num("erbs_kt_low"), num("erbs_kt_high")) {
        if lo > hi {
            out.push(Violation {
                field: "erbs_kt_low".into(),
                value: Some(ParamValue::Number(lo)),
                level: params.fields.get("erbs_kt_low").map(|p| p.level),
                message: "must not exceed erbs_kt_high".into(),
            });
        }
    }
    for h in &params.forcing {
        for f in WeatherField::ALL {
            match h.values.get(f.key()) {
                Some(v) if f.in_range(v.value) => {}
                other => out.push(Violation {
                    field: format!("forcing[{}/{} h{}].{}", h.month, h.day, h.hour, f.key()),
                    value: other.map(|v| ParamValue::Number(v.value)),
                    level: other.map(|v| v.level),
                    message: "missing or out of range".into(),
                }),
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty(level: ProvenanceLevel) -> PartialParams {
        PartialParams::new(level)
    }

    fn run(
        climate: &PartialParams,
        realtime: &PartialParams,
        advisor: &PartialParams,
        user: &PartialParams,
    ) -> ResolvedParams {
        merge(&PartialParams::defaults(), climate, realtime, advisor, user).unwrap()
    }

    #[test]
    fn climate_suppresses_advisor() {
        let mut c = empty(ProvenanceLevel::Climate);
        c.set("wind_speed", 3.1, "epw");
        let mut a = empty(ProvenanceLevel::Advisor);
        a.set("wind_speed", 4.5, "advisor");
        let p = run(&c, &empty(ProvenanceLevel::Realtime), &a, &empty(ProvenanceLevel::User));
        assert_eq!(p.num("wind_speed"), 3.1);
        assert_eq!(p.level("wind_speed"), Some(ProvenanceLevel::Climate));
    }

    #[test]
    fn default_only() {
        let e = |l| empty(l);
        let p = run(
            &e(ProvenanceLevel::Climate),
            &e(ProvenanceLevel::Realtime),
            &e(ProvenanceLevel::Advisor),
            &e(ProvenanceLevel::User),
        );
        assert_eq!(p.num("wind_speed"), 2.0);
        assert_eq!(p.level("wind_speed"), Some(ProvenanceLevel::Default));
        assert!(validate(&p).is_ok());
    }

    #[test]
    fn user_overrides_climate() {
        let mut c = empty(ProvenanceLevel::Climate);
        c.set("wind_speed", 3.1, "epw");
        let mut u = empty(ProvenanceLevel::User);
        u.set("wind_speed", 6.2, "cli");
        let p = run(
            &c,
            &empty(ProvenanceLevel::Realtime),
            &empty(ProvenanceLevel::Advisor),
            &u,
        );
        assert_eq!(p.num("wind_speed"), 6.2);
        assert_eq!(p.level("wind_speed"), Some(ProvenanceLevel::User));
        assert!(p
            .to_json()
            .contains("\"wind_speed\": {\n      \"value\": 6.2,\n      \"level\": \"user\""));
    }

    #[test]
    fn incomplete_defaults() {
        let mut d = PartialParams::defaults();
        d.entries.remove("z0");
        let e = |l| empty(l);
        let err = merge(
            &d,
            &e(ProvenanceLevel::Climate),
            &e(ProvenanceLevel::Realtime),
            &e(ProvenanceLevel::Advisor),
            &e(ProvenanceLevel::User),
        )
        .unwrap_err();
        assert!(matches!(err, ParamError::IncompleteDefaults(ref v) if v == &["z0".to_string()]));
    }

    #[test]
    fn invalid_winner_names_field_value_source() {
        let mut u = empty(ProvenanceLevel::User);
        u.set("roof_albedo", 1.3, "delta.json");
        let e = |l| empty(l);
        let err = merge(
            &PartialParams::defaults(),
            &e(ProvenanceLevel::Climate),
            &e(ProvenanceLevel::Realtime),
            &e(ProvenanceLevel::Advisor),
            &u,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("roof_albedo") && msg.contains("1.3") && msg.contains("user") && msg.contains("delta.json"),
            "{msg}"
        );
    }

    #[test]
    fn validate_collects_all() {
        let e = |l| empty(l);
        let mut p = run(
            &e(ProvenanceLevel::Climate),
            &e(ProvenanceLevel::Realtime),
            &e(ProvenanceLevel::Advisor),
            &e(ProvenanceLevel::User),
        );
        p.fields.get_mut("roof_albedo").unwrap().value = ParamValue::Number(1.3);
        p.fields.get_mut("slice_heights").unwrap().value = ParamValue::List(vec![2.0, 10.0, 10.0, 20.0]);
        p.fields.get_mut("day").unwrap().value = ParamValue::Number(31.0);
        p.fields.remove("z0");
        let v = validate(&p).unwrap_err();
        let msgs: Vec<String> = v.iter().map(|v| v.to_string()).collect();
        assert_eq!(v.len(), 4, "{msgs:?}");
        assert!(msgs.iter().any(|m| m.starts_with("roof_albedo: albedo out of [0,1]")));
        assert!(msgs
            .iter()
            .any(|m| m.starts_with("slice_heights: not strictly increasing")));
        assert!(msgs.iter().any(|m| m.starts_with("z0: missing")));
        assert!(msgs.iter().any(|m| m.starts_with("day: no day 31 in month 4")));
    }
}
