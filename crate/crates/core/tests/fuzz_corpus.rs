//! Replays the checked-in fuzz corpus through the same entry points as the
//! fuzz targets, plus seeded truncations and byte flips of each seed.

use std::path::{Path, PathBuf};

use microclimate::geometry::{clean_mesh, parse_stl};
use microclimate::orchestrator::{IntentResponse, MaterialsResponse, ReportResponse};
use microclimate::outputs::parse_vtk_structured;
use microclimate::params::{
    apply_delta, merge, parse_partial, ParamDelta, PartialParams, ProvenanceLevel, ResolvedParams,
};
use microclimate::weather::{parse_epw_str, parse_realtime_json, select_day, RealtimeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {target}");
    files
        .into_iter()
        .map(|p| (p.clone(), std::fs::read(p).unwrap()))
        .collect()
}

fn base_params() -> ResolvedParams {
    let e = PartialParams::new;
    merge(
        &PartialParams::defaults(),
        &e(ProvenanceLevel::Climate),
        &e(ProvenanceLevel::Realtime),
        &e(ProvenanceLevel::Advisor),
        &e(ProvenanceLevel::User),
    )
    .unwrap()
}

/// Each entry point returns whether the input was accepted.
fn run_target(target: &str, data: &[u8]) -> bool {
    let text = || std::str::from_utf8(data).ok();
    match target {
        "stl" => parse_stl(data).map(|m| clean_mesh(&m, 1e-6).is_ok()).unwrap_or(false),
        "epw" => parse_epw_str(&String::from_utf8_lossy(data))
            .map(|f| {
                let _ = select_day(&f.records, 4, 20);
            })
            .is_ok(),
        "params_partial" => text().is_some_and(|t| {
            parse_partial(t, ProvenanceLevel::User, "fuzz").is_ok_and(|u| {
                let e = PartialParams::new;
                let _ = merge(
                    &PartialParams::defaults(),
                    &e(ProvenanceLevel::Climate),
                    &e(ProvenanceLevel::Realtime),
                    &e(ProvenanceLevel::Advisor),
                    &u,
                );
                true
            })
        }),
        "params_snapshot" => text().is_some_and(|t| {
            ResolvedParams::from_json(t).is_ok_and(|p| {
                assert_eq!(ResolvedParams::from_json(&p.to_json()).unwrap(), p);
                true
            })
        }),
        "param_delta" => text().is_some_and(|t| {
            ParamDelta::from_json(t).is_ok_and(|d| {
                let _ = apply_delta(&base_params(), &d);
                true
            })
        }),
        "realtime_json" => text().is_some_and(|t| parse_realtime_json(t, &RealtimeConfig::default().field_map).is_ok()),
        "vtk_structured" => parse_vtk_structured(&String::from_utf8_lossy(data)).is_ok(),
        "advisor_response" => {
            serde_json::from_slice::<IntentResponse>(data).is_ok()
                | serde_json::from_slice::<MaterialsResponse>(data).is_ok()
                | serde_json::from_slice::<ReportResponse>(data).is_ok()
        }
        other => panic!("unknown target {other}"),
    }
}

const TARGETS: [&str; 8] = [
    "stl",
    "epw",
    "params_partial",
    "params_snapshot",
    "param_delta",
    "realtime_json",
    "vtk_structured",
    "advisor_response",
];

#[test]
fn every_seed_is_accepted() {
    for t in TARGETS {
        for (path, data) in corpus(t) {
            assert!(run_target(t, &data), "seed rejected: {}", path.display());
        }
    }
}

#[test]
fn mutated_seeds_never_panic() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for t in TARGETS {
        for (_, data) in corpus(t) {
            for cut in [0, 1, data.len() / 3, data.len() / 2, data.len().saturating_sub(1)] {
                run_target(t, &data[..cut]);
            }
            for _ in 0..150 {
                let mut m = data.clone();
                for _ in 0..rng.random_range(1..8) {
                    let i = rng.random_range(0..m.len());
                    m[i] = match rng.random_range(0..4) {
                        0 => rng.random(),
                        1 => b'9',
                        2 => b',',
                        _ => m[i] ^ 0x20,
                    };
                }
                run_target(t, &m);
            }
        }
    }
}
