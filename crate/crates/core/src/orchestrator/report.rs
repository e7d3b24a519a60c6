//! Markdown report. Every figure is printed with a fixed precision from the
//! metrics it comes from: PET/MRT 0.01 °C, energy 0.1 kWh, percentages 0.1,
//! EUI 0.01 kWh/m², power 0.1 W, coordinates 0.1 m.

use std::fmt::Write as _;

use super::advisor::Category;
use super::pipeline::{PipelineState, SNAPSHOT_FILE};
use super::Stage;

pub fn fmt_pet(v: f64) -> String {
    format!("{v:.2}")
}

pub fn fmt_energy(v: f64) -> String {
    format!("{v:.1}")
}

pub fn fmt_pct(v: f64) -> String {
    format!("{v:.1}")
}

fn fmt_m(v: f64) -> String {
    format!("{v:.1}")
}

fn fmt_signed_pet(v: f64) -> String {
    format!("{v:+.2}")
}

fn or_dash(v: Option<String>) -> String {
    v.unwrap_or_else(|| "-".to_string())
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

pub fn draft_report(state: &PipelineState) -> String {
    let mut r = String::new();
    let w = &mut r;
    let _ = writeln!(w, "# Microclimate analysis report\n");

    let _ = writeln!(w, "## Run summary\n");
    let _ = writeln!(w, "- Query: \"{}\"", state.query.trim());
    let status = match &state.error {
        None => "completed".to_string(),
        Some(f) => format!("failed at the {} stage", f.stage),
    };
    let _ = writeln!(w, "- Status: {status}");
    if let Some(i) = &state.intent {
        let _ = writeln!(w, "- Analyses: {}", i.analyses.names().join(", "));
        let _ = writeln!(w, "- Intent rationale: {}", i.rationale);
    }
    if let Some(t) = state.timestamp {
        let _ = writeln!(
            w,
            "- Representative time: {:02}-{:02}, hour {} ({:02}:00 to {:02}:00 local)",
            t.month,
            t.day,
            t.hour,
            t.hour - 1,
            t.hour
        );
    }
    if let Some(b) = &state.baseline {
        let d = b.run.domain_bbox_m;
        let _ = writeln!(
            w,
            "- Buildings: {}; domain [{}, {}, {}, {}] m; grid {} m; seed {}",
            b.run.building_count,
            fmt_m(d[0]),
            fmt_m(d[1]),
            fmt_m(d[2]),
            fmt_m(d[3]),
            fmt_m(b.run.cell_size_m),
            b.run.seed
        );
        if let Some(p) = b.peak {
            let _ = writeln!(
                w,
                "- Peak PET: {} °C (MRT {} °C) at ({}, {}) m, hour {}",
                fmt_pet(p.pet_c),
                fmt_pet(p.mrt_c),
                fmt_m(p.x),
                fmt_m(p.y),
                p.hour
            );
        }
        if let Some(t) = b.total_cooling_kwh {
            let _ = writeln!(w, "- Total envelope cooling energy: {} kWh", fmt_energy(t));
        }
        if let Some(p) = b.peak_cooling_power_w {
            let _ = writeln!(w, "- Peak district cooling power: {} W", fmt_energy(p));
        }
    }
    let _ = writeln!(
        w,
        "- Advisor: {} ({} calls, {} logged interactions)\n",
        state.advisor, state.advisor_calls, state.logged_interactions
    );

    if let Some(f) = &state.error {
        let _ = writeln!(w, "## Diagnostics\n");
        let _ = writeln!(w, "- Failed stage: {}", f.stage);
        let _ = writeln!(w, "- Error: {}", f.message);
        let done: Vec<&str> = state
            .stages
            .iter()
            .map(|s| s.stage)
            .filter(|s| *s != Stage::Report)
            .map(Stage::name)
            .collect();
        let _ = writeln!(
            w,
            "- Completed stages: {}",
            if done.is_empty() {
                "none".to_string()
            } else {
                done.join(", ")
            }
        );
        match &state.partial_snapshot {
            Some(p) => {
                let _ = writeln!(w, "- Partial provenance snapshot: `{p}`");
            }
            None if state.params.is_some() => {
                let _ = writeln!(w, "- Provenance snapshot: `{SNAPSHOT_FILE}`");
            }
            None => {}
        }
        let _ = writeln!(w);
    }

    if let Some(p) = &state.params {
        let _ = writeln!(w, "## Parameter provenance\n");
        let _ = writeln!(w, "| Parameter | Value | Level | Source |");
        let _ = writeln!(w, "|---|---|---|---|");
        for (k, v) in &p.fields {
            let _ = writeln!(
                w,
                "| {k} | {} | {} | {} |",
                cell(&v.value.to_string()),
                v.level,
                cell(&v.source)
            );
        }
        let _ = writeln!(w);
    }

    if let Some(b) = &state.baseline {
        if !b.hotspots.is_empty() {
            let _ = writeln!(w, "## Thermal hotspots\n");
            let _ = writeln!(
                w,
                "Highest pedestrian PET per hour, ranked. Coordinates are cell centres in metres."
            );
            let _ = writeln!(w);
            let _ = writeln!(
                w,
                "| Rank | Hour | x (m) | y (m) | PET (°C) | MRT (°C) | Nearest buildings | Causes |"
            );
            let _ = writeln!(w, "|---|---|---|---|---|---|---|---|");
            for h in &b.hotspots {
                let _ = writeln!(
                    w,
                    "| {} | {} | {} | {} | {} | {} | {} | {} |",
                    h.rank,
                    h.hour,
                    fmt_m(h.x),
                    fmt_m(h.y),
                    fmt_pet(h.pet_c),
                    fmt_pet(h.mrt_c),
                    h.nearest_buildings.join(", "),
                    if h.causes.is_empty() {
                        "-".to_string()
                    } else {
                        h.causes.join(", ")
                    }
                );
            }
            if let Some(h) = b.hotspots.first() {
                let _ = writeln!(
                    w,
                    "\nThe maximum PET of {} °C occurs at ({}, {}) m at hour {}, between buildings {}.",
                    fmt_pet(h.pet_c),
                    fmt_m(h.x),
                    fmt_m(h.y),
                    h.hour,
                    h.nearest_buildings.join(" and ")
                );
            }
            let _ = writeln!(w);
        }
        if !b.energy_ranking.is_empty() {
            let _ = writeln!(w, "## Envelope cooling energy\n");
            let _ = writeln!(w, "| Rank | Building | Cooling (kWh) | EUI (kWh/m²) | Outlier |");
            let _ = writeln!(w, "|---|---|---|---|---|");
            for e in &b.energy_ranking {
                let _ = writeln!(
                    w,
                    "| {} | {} | {} | {:.2} | {} |",
                    e.rank,
                    e.id,
                    fmt_energy(e.energy_kwh),
                    e.eui_kwh_m2,
                    if e.outlier { "yes" } else { "no" }
                );
            }
            let outliers: Vec<&str> = b
                .energy_ranking
                .iter()
                .filter(|e| e.outlier)
                .map(|e| e.id.as_str())
                .collect();
            let _ = writeln!(
                w,
                "\nOutliers (EUI above mean + k standard deviations): {}.\n",
                if outliers.is_empty() {
                    "none".to_string()
                } else {
                    outliers.join(", ")
                }
            );
        }
    }

    for round in &state.rounds {
        let d = &round.delta;
        let _ = writeln!(w, "## Mitigation round {}\n", round.round);
        let scope = if round.plan.all_buildings {
            "all buildings and all ground".to_string()
        } else {
            round
                .plan
                .targets
                .iter()
                .map(|t| format!("{} ({})", t.id, t.rationale))
                .collect::<Vec<_>>()
                .join("; ")
        };
        let _ = writeln!(w, "- Targets: {scope}");
        for c in &round.plan.delta.changes {
            let old = c.old.as_ref().map_or("-".to_string(), |v| v.to_string());
            let _ = writeln!(w, "- {}: {} -> {}", c.field, old, c.new);
        }
        let _ = writeln!(w, "- Rationale: {}\n", round.plan.rationale);
        let _ = writeln!(w, "| Building | Before (kWh) | After (kWh) | Reduction (%) |");
        let _ = writeln!(w, "|---|---|---|---|");
        for b in &d.buildings {
            let _ = writeln!(
                w,
                "| {} | {} | {} | {} |",
                b.id,
                fmt_energy(b.before_kwh),
                fmt_energy(b.after_kwh),
                or_dash(b.reduction_pct.map(fmt_pct))
            );
        }
        let _ = writeln!(
            w,
            "| Total | {} | {} | {} |\n",
            fmt_energy(d.total_before_kwh),
            fmt_energy(d.total_after_kwh),
            or_dash(d.total_reduction_pct.map(fmt_pct))
        );
        if let (Some(a), Some(b)) = (d.peak_power_before_w, d.peak_power_after_w) {
            let _ = writeln!(
                w,
                "Peak cooling power: {} W before, {} W after.\n",
                fmt_energy(a),
                fmt_energy(b)
            );
        }
        let rows: Vec<_> = d.hotspots.iter().chain(&d.probes).collect();
        if !rows.is_empty() {
            let _ = writeln!(
                w,
                "| Point | Hour | Sunlit | PET before (°C) | PET after (°C) | ΔPET (°C) |"
            );
            let _ = writeln!(w, "|---|---|---|---|---|---|");
            for p in rows {
                let _ = writeln!(
                    w,
                    "| {} | {} | {} | {} | {} | {} |",
                    p.label,
                    p.hour,
                    if p.lit { "yes" } else { "no" },
                    fmt_pet(p.pet_before_c),
                    fmt_pet(p.pet_after_c),
                    fmt_signed_pet(p.delta_pet_c)
                );
            }
            let _ = writeln!(w);
        }
        let _ = writeln!(w, "### Albedo penalty\n");
        let energy_fell = d.total_after_kwh < d.total_before_kwh;
        let mean = d.lit_hotspot_mean_delta_pet_c;
        let text = match (d.albedo_penalty, mean) {
            (true, Some(m)) => format!(
                "Detected. Cooling energy fell, but PET at sunlit hotspots rose by {} °C on average \
                 (threshold {} °C). Brighter ground and walls reflect more shortwave onto pedestrians; \
                 keep reflective finishes on roofs and shade sunlit walkways.",
                fmt_signed_pet(m),
                fmt_signed_pet(d.penalty_threshold_c)
            ),
            (false, Some(m)) => format!(
                "Not detected. Mean ΔPET at sunlit hotspots is {} °C against a {} °C threshold; \
                 cooling energy {}.",
                fmt_signed_pet(m),
                fmt_signed_pet(d.penalty_threshold_c),
                if energy_fell { "fell" } else { "did not fall" }
            ),
            (_, None) => "Not assessed: no sunlit hotspot was available for comparison.".to_string(),
        };
        let _ = writeln!(w, "{text}\n");
    }

    if !state.recommendations.is_empty() {
        let _ = writeln!(w, "## Recommendations\n");
        for cat in [Category::Materials, Category::Shading, Category::Ventilation] {
            let items: Vec<_> = state.recommendations.iter().filter(|r| r.category == cat).collect();
            if items.is_empty() {
                continue;
            }
            let title = match cat {
                Category::Materials => "Materials",
                Category::Shading => "Shading",
                Category::Ventilation => "Ventilation",
            };
            let _ = writeln!(w, "### {title}\n");
            for i in items {
                let _ = writeln!(w, "- {}", i.text);
            }
            let _ = writeln!(w);
        }
    }

    if !state.warnings.is_empty() {
        let _ = writeln!(w, "## Warnings\n");
        for m in &state.warnings {
            let _ = writeln!(w, "- {m}");
        }
        let _ = writeln!(w);
    }

    let _ = writeln!(w, "## Reference output files\n");
    for f in state.files() {
        let _ = writeln!(w, "- `{f}`");
    }
    r
}
