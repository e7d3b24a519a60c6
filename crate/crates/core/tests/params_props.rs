use microclimate::params::{
    apply_delta, merge, validate, ParamDelta, ParamValue, PartialParams, ProvenanceLevel, ResolvedParams,
};
use proptest::prelude::*;

const LEVELS: [ProvenanceLevel; 4] = [
    ProvenanceLevel::Climate,
    ProvenanceLevel::Realtime,
    ProvenanceLevel::Advisor,
    ProvenanceLevel::User,
];

/// Wind speeds offered by each non-default source, keyed by position in `LEVELS`.
fn sources(offers: &[Option<f64>; 4]) -> [PartialParams; 4] {
    let mut out = LEVELS.map(PartialParams::new);
    for (p, o) in out.iter_mut().zip(offers) {
        if let Some(v) = o {
            p.set("wind_speed", *v, p.level.name());
        }
    }
    out
}

fn run(offers: &[Option<f64>; 4]) -> ResolvedParams {
    let [c, r, a, u] = sources(offers);
    merge(&PartialParams::defaults(), &c, &r, &a, &u).unwrap()
}

/// Expected winner written straight from the priority rule.
fn expected(offers: &[Option<f64>; 4]) -> (f64, ProvenanceLevel) {
    let [c, r, a, u] = *offers;
    if let Some(v) = u {
        (v, ProvenanceLevel::User)
    } else if let Some(v) = c {
        (v, ProvenanceLevel::Climate)
    } else if let Some(v) = r {
        (v, ProvenanceLevel::Realtime)
    } else if let Some(v) = a {
        (v, ProvenanceLevel::Advisor)
    } else {
        (2.0, ProvenanceLevel::Default)
    }
}

#[test]
fn all_presence_patterns() {
    let values = [3.1, 3.7, 4.5, 6.2];
    for mask in 0u32..32 {
        let mut d = PartialParams::defaults();
        if mask & 1 == 0 {
            d.entries.remove("wind_speed");
        }
        let offers: [Option<f64>; 4] = std::array::from_fn(|i| (mask >> (i + 1) & 1 == 1).then_some(values[i]));
        let [c, r, a, u] = sources(&offers);
        let got = merge(&d, &c, &r, &a, &u);
        if mask & 1 == 0 {
            assert!(got.is_err(), "mask {mask:05b}: defaults incomplete must fail");
            continue;
        }
        let p = got.unwrap();
        let (v, l) = expected(&offers);
        assert_eq!(
            (p.num("wind_speed"), p.level("wind_speed").unwrap()),
            (v, l),
            "mask {mask:05b}"
        );
    }
}

fn offer() -> impl Strategy<Value = Option<f64>> {
    prop::option::of(0.0..40.0f64)
}

proptest! {
    #[test]
    fn merge_is_idempotent(offers in [offer(), offer(), offer(), offer()]) {
        let a = run(&offers);
        prop_assert_eq!(run(&offers), a.clone());
        // Feeding the result back as the defaults changes nothing.
        let mut d = PartialParams::new(ProvenanceLevel::Default);
        for (k, f) in &a.fields {
            d.set(k, f.value.clone(), &f.source);
        }
        let [c, r, ad, u] = sources(&offers);
        let b = merge(&d, &c, &r, &ad, &u).unwrap();
        for (k, f) in &a.fields {
            prop_assert_eq!(&b.fields[k].value, &f.value);
        }
        prop_assert_eq!(b.level("wind_speed"), a.level("wind_speed"));
    }

    #[test]
    fn advisor_is_suppressed_by_measured_sources(
        c in offer(), r in offer(), a1 in 0.0..40.0f64, a2 in 0.0..40.0f64
    ) {
        prop_assume!(c.is_some() || r.is_some());
        let x = run(&[c, r, Some(a1), None]);
        let y = run(&[c, r, Some(a2), None]);
        prop_assert_eq!(x.num("wind_speed"), y.num("wind_speed"));
        prop_assert_ne!(x.level("wind_speed"), Some(ProvenanceLevel::Advisor));
    }

    #[test]
    fn monotone_under_merge_precedence(offers in [offer(), offer(), offer(), offer()], idx in 0usize..4, v in 0.0..40.0f64) {
        let before = run(&offers);
        let mut more = offers;
        more[idx] = Some(more[idx].unwrap_or(v));
        let after = run(&more);
        let (lb, la) = (before.level("wind_speed").unwrap(), after.level("wind_speed").unwrap());
        prop_assert!(la.precedence() >= lb.precedence());
        // A source ranked below the current winner cannot change the value.
        if LEVELS[idx].precedence() < lb.precedence() {
            prop_assert_eq!(after.num("wind_speed"), before.num("wind_speed"));
        }
    }

    #[test]
    fn advisor_only_touches_fields_left_unset(
        c in offer(), r in offer(), adv_ws in 0.0..40.0f64, adv_rh in 0.0..100.0f64, adv_alb in 0.0..1.0f64
    ) {
        let mut cl = PartialParams::new(ProvenanceLevel::Climate);
        let mut rt = PartialParams::new(ProvenanceLevel::Realtime);
        if let Some(v) = c { cl.set("wind_speed", v, "epw"); cl.set("relative_humidity", 80.0, "epw"); }
        if let Some(v) = r { rt.set("wind_speed", v, "rt"); }
        let mut adv = PartialParams::new(ProvenanceLevel::Advisor);
        adv.set("wind_speed", adv_ws, "adv").set("relative_humidity", adv_rh, "adv").set("roof_albedo", adv_alb, "adv");
        let none = PartialParams::new(ProvenanceLevel::Advisor);
        let user = PartialParams::new(ProvenanceLevel::User);
        let with = merge(&PartialParams::defaults(), &cl, &rt, &adv, &user).unwrap();
        let without = merge(&PartialParams::defaults(), &cl, &rt, &none, &user).unwrap();
        for (k, f) in &with.fields {
            if f.value != without.fields[k].value {
                prop_assert!(!cl.entries.contains_key(k) && !rt.entries.contains_key(k), "{}", k);
            }
        }
    }

    #[test]
    fn delta_then_inverse_restores(alb in 0.0..1.0f64, ws in 0.0..40.0f64, user_level in any::<bool>()) {
        let base = run(&[Some(3.0), None, None, None]);
        let level = if user_level { ProvenanceLevel::User } else { ProvenanceLevel::Advisor };
        let d = ParamDelta::new(level)
            .change("roof_albedo", None, alb, "r")
            .change("wind_speed", Some(ParamValue::Number(3.0)), ws, "w")
            .change("roof_albedo", None, 1.0 - alb, "again");
        let applied = apply_delta(&base, &d).unwrap();
        prop_assert_eq!(applied.num("roof_albedo"), 1.0 - alb);
        prop_assert_eq!(applied.level("wind_speed"), Some(level));
        prop_assert!(validate(&applied).is_ok());
        let back = apply_delta(&applied, &d.inverse(&base).unwrap()).unwrap();
        prop_assert_eq!(back, base);
    }

    #[test]
    fn snapshot_round_trip(offers in [offer(), offer(), offer(), offer()], alb in 0.0..1.0f64) {
        let mut p = run(&offers);
        p = apply_delta(&p, &ParamDelta::new(ProvenanceLevel::Advisor).change("wall_albedo", None, alb, "why")).unwrap();
        let text = p.to_json();
        prop_assert_eq!(p.to_json(), text.clone());
        let back = ResolvedParams::from_json(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(back.to_json(), text);
    }
}

#[test]
fn snapshot_file_round_trip_and_rejections() {
    let dir = tempfile::tempdir().unwrap();
    let p = run(&[Some(3.1), None, None, Some(6.2)]);
    let path = dir.path().join("params_snapshot.json");
    p.snapshot(&path).unwrap();
    assert_eq!(ResolvedParams::load_snapshot(&path).unwrap(), p);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"level\": \"user\""));

    let dup = text.replacen(
        "\"schema_version\": 1,",
        "\"schema_version\": 1, \"schema_version\": 1,",
        1,
    );
    assert!(ResolvedParams::from_json(&dup).is_err());
    let bad = text.replacen("\"value\": 0.2,", "\"value\": 1.3,", 1);
    assert!(ResolvedParams::from_json(&bad).is_err());
    assert!(p.snapshot(&dir.path().join("missing/dir/x.json")).is_err());
}
