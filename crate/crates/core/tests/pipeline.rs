use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use microclimate::fixtures::synthetic_tropical_epw;
use microclimate::geometry::{box_mesh, write_binary_stl, Vec3};
use microclimate::orchestrator::{
    fmt_energy, fmt_pet, run_pipeline, AdvisorMode, InteractionRecord, RemoteConfig, RunConfig, Stage, STRUCTURED_LOG,
};
use microclimate::outputs::RunMetrics;
use microclimate::weather::SiteLocation;

const AUDIT: &str = "Run a fully coupled CFD + solar audit of the district for the inter-monsoon period \
                     and flag thermal hotspots or inefficient pockets.";

/// Four 20 m blocks of different heights on a 2×2 layout.
fn district(dir: &Path) -> (PathBuf, PathBuf) {
    let geo = dir.join("geometry_in");
    std::fs::create_dir_all(&geo).unwrap();
    for (i, (x, y, h)) in [
        (0.0, 0.0, 12.0),
        (35.0, 0.0, 24.0),
        (0.0, 35.0, 18.0),
        (35.0, 35.0, 45.0),
    ]
    .into_iter()
    .enumerate()
    {
        let f = std::fs::File::create(geo.join(format!("block_{}.stl", i + 1))).unwrap();
        write_binary_stl(
            &box_mesh(Vec3::new(x, y, 0.0), Vec3::new(x + 20.0, y + 20.0, h)),
            "block",
            f,
        )
        .unwrap();
    }
    let epw = dir.join("site.epw");
    std::fs::write(&epw, synthetic_tropical_epw(&SiteLocation::changi())).unwrap();
    (geo, epw)
}

fn config(dir: &Path, query: &str, out: &str) -> RunConfig {
    let (geo, epw) = district(dir);
    let overrides = dir.join("overrides.json");
    // Coarser sampling keeps the test quick; the geometry is small anyway.
    std::fs::write(&overrides, r#"{"svf_samples": 64, "spinup_days": 1}"#).unwrap();
    let mut c = RunConfig::new(query, geo, epw, dir.join(out));
    c.overrides_path = Some(overrides);
    c
}

fn report_paths(report: &str) -> Vec<String> {
    report
        .lines()
        .filter_map(|l| l.strip_prefix("- `").and_then(|r| r.strip_suffix('`')))
        .map(str::to_string)
        .collect()
}

fn read_log(dir: &Path) -> Vec<InteractionRecord> {
    serde_json::from_str(&std::fs::read_to_string(dir.join(STRUCTURED_LOG)).unwrap()).unwrap()
}

#[test]
fn audit_of_a_four_building_district() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), AUDIT, "run");
    let state = run_pipeline(&c);
    assert!(state.succeeded(), "{:?}", state.error);
    let out = &c.out_dir;

    let order: Vec<Stage> = state.stages.iter().map(|s| s.stage).collect();
    assert_eq!(
        order,
        [
            Stage::Intent,
            Stage::Geometry,
            Stage::Params,
            Stage::Solve,
            Stage::Report
        ]
    );

    let count = |prefix: &str| state.files().iter().filter(|f| f.starts_with(prefix)).count();
    assert_eq!(count("wind/wind_z"), 7);
    assert_eq!(count("surfaces/surface_"), 24);
    assert_eq!(count("pedestrian/pet_"), 24);
    for f in [
        "building_energy.json",
        "hotspots.json",
        "metrics.json",
        "params_snapshot.json",
        "report.md",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }

    let metrics: RunMetrics =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics.buildings.len(), 4);
    assert_eq!(metrics.hourly.len(), 24);
    assert_eq!((metrics.run.month, metrics.run.day, metrics.run.hour), (4, 20, 13));
    for f in &metrics.files {
        assert!(out.join(f).exists(), "{f}");
    }

    // Every path in the report exists; report numbers are the metrics' numbers.
    let report = std::fs::read_to_string(out.join("report.md")).unwrap();
    let paths = report_paths(&report);
    assert!(paths.len() > 50);
    for p in &paths {
        assert!(out.join(p).exists(), "report names missing file {p}");
    }
    for h in &metrics.hotspots {
        let row = format!(
            "| {} | {} | {:.1} | {:.1} | {} | {} | {} |",
            h.rank,
            h.hour,
            h.x,
            h.y,
            fmt_pet(h.pet_c),
            fmt_pet(h.mrt_c),
            h.nearest_buildings.join(", ")
        );
        assert!(report.contains(&row), "missing row {row}");
        assert_eq!(h.nearest_buildings.len(), 2);
    }
    for e in &metrics.energy_ranking {
        assert!(report.contains(&format!("| {} | {} | {} |", e.rank, e.id, fmt_energy(e.energy_kwh))));
    }
    let top = &metrics.hotspots[0];
    assert!(report.contains(&format!("maximum PET of {} °C", fmt_pet(top.pet_c))));

    // Intent and report each made one logged call.
    assert_eq!(state.advisor_calls, 2);
    assert_eq!(read_log(out).len(), state.advisor_calls);
}

#[test]
fn missing_climate_file_fails_at_params_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path(), AUDIT, "run");
    c.climate_path = tmp.path().join("nope.epw");
    let state = run_pipeline(&c);
    let err = state.error.clone().expect("params failure");
    assert_eq!(err.stage, Stage::Params);
    let report = std::fs::read_to_string(c.out_dir.join("report.md")).unwrap();
    assert!(report.contains("Failed stage: params"));
    assert!(report.contains("nope.epw"), "{report}");
    assert!(report.contains("params_snapshot.partial.json"));
    assert!(c.out_dir.join("params_snapshot.partial.json").exists());
    assert!(!c.out_dir.join("metrics.json").exists());
    for p in report_paths(&report) {
        assert!(c.out_dir.join(&p).exists(), "{p}");
    }
}

#[test]
fn query_without_analyses_fails_at_intent() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "hello", "run");
    let state = run_pipeline(&c);
    assert_eq!(state.error.as_ref().map(|e| e.stage), Some(Stage::Intent));
    assert!(std::fs::read_to_string(c.out_dir.join("report.md"))
        .unwrap()
        .contains("no analysis derivable"));
    assert_eq!(read_log(&c.out_dir).len(), state.advisor_calls);
}

#[test]
fn advisor_off_leaves_empty_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path(), "wind and ventilation study", "run");
    c.advisor = AdvisorMode::Off;
    let state = run_pipeline(&c);
    assert!(state.succeeded(), "{:?}", state.error);
    assert_eq!(state.advisor_calls, 0);
    assert!(read_log(&c.out_dir).is_empty());
    assert_eq!(
        std::fs::read_to_string(c.out_dir.join("llm_interactions.log")).unwrap(),
        ""
    );
    // Wind only: slices but no surface or PET files.
    assert!(state.files().iter().any(|f| f.starts_with("wind/")));
    assert!(!state.files().iter().any(|f| f.starts_with("surfaces/")));
}

/// A chat-completion endpoint whose replies never match the schema.
fn broken_endpoint(replies: usize) -> (String, std::thread::JoinHandle<usize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = std::thread::spawn(move || {
        let mut served = 0;
        for stream in listener.incoming().take(replies) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let doc: serde_json::Value = serde_json::from_slice(&body).unwrap();
            assert_eq!(doc["messages"][1]["role"], "user");
            let reply = r#"{"choices":[{"message":{"role":"assistant","content":"Sure! Here is my plan."}}]}"#;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.len(),
                reply
            )
            .unwrap();
            served += 1;
        }
        served
    });
    (url, handle)
}

#[test]
fn remote_schema_violations_fall_back_and_are_all_logged() {
    let tmp = tempfile::tempdir().unwrap();
    let (url, server) = broken_endpoint(4);
    let mut c = config(tmp.path(), "Map PET hotspots and cooling energy", "run");
    c.advisor = AdvisorMode::Remote;
    c.remote = Some(RemoteConfig {
        endpoint: url,
        model: "test-model".into(),
        timeout_s: 10.0,
    });
    let state = run_pipeline(&c);
    assert!(state.succeeded(), "{:?}", state.error);
    assert_eq!(server.join().unwrap(), 4);
    // Intent and report: two remote attempts and one fallback each.
    assert_eq!(state.advisor_calls, 6);
    let log = read_log(&c.out_dir);
    assert_eq!(log.len(), 6);
    let advisors: Vec<&str> = log.iter().map(|r| r.advisor.as_str()).collect();
    assert_eq!(
        advisors,
        [
            "remote",
            "remote",
            "deterministic-fallback",
            "remote",
            "remote",
            "deterministic-fallback"
        ]
    );
    assert_eq!(
        state
            .warnings
            .iter()
            .filter(|w| w.contains("deterministic advisor"))
            .count(),
        2
    );
    let verbose = std::fs::read_to_string(c.out_dir.join("llm_interactions.log")).unwrap();
    assert_eq!(verbose.matches("=== [").count(), 6);
}

#[test]
fn user_delta_round_and_zero_rounds() {
    let tmp = tempfile::tempdir().unwrap();
    let delta = tmp.path().join("delta.json");
    std::fs::write(
        &delta,
        r#"{"changes":[{"field":"roof_albedo","new":0.65,"reason":"cool roofs"}]}"#,
    )
    .unwrap();
    let mut c = config(tmp.path(), "cooling energy audit", "run");
    c.mitigate = true;
    c.delta_path = Some(delta.clone());
    let state = run_pipeline(&c);
    assert!(state.succeeded(), "{:?}", state.error);
    assert_eq!(state.rounds.len(), 1);
    let d = state.delta.as_ref().unwrap();
    assert!(d.total_after_kwh < d.total_before_kwh);
    assert!(c.out_dir.join("delta_metrics.json").exists());
    assert!(c.out_dir.join("round_1/metrics.json").exists());
    let report = std::fs::read_to_string(c.out_dir.join("report.md")).unwrap();
    assert!(report.contains("| Building | Before (kWh) | After (kWh) | Reduction (%) |"));
    for b in &d.buildings {
        let pct = format!("{:.1}", b.reduction_pct.unwrap());
        assert!(report.contains(&format!(
            "| {} | {} | {} | {pct} |",
            b.id,
            fmt_energy(b.before_kwh),
            fmt_energy(b.after_kwh)
        )));
    }
    // Intent, report; the user delta skips the materials call.
    assert_eq!(read_log(&c.out_dir).len(), 2);

    let mut c0 = config(tmp.path(), "cooling energy audit", "run0");
    c0.mitigate = true;
    c0.rounds = 0;
    let s0 = run_pipeline(&c0);
    assert!(s0.succeeded());
    assert!(s0.rounds.is_empty());
    assert!(!c0.out_dir.join("delta_metrics.json").exists());
}
