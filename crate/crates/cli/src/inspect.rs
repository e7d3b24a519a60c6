//! Plain-text tables for `microclimate inspect`.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use microclimate::geometry::{build_index, GeometryConfig};
use microclimate::params::ResolvedParams;
use microclimate::weather::{parse_epw, WeatherField};

pub fn geometry(dir: &Path, out: &mut impl Write) -> anyhow::Result<()> {
    let set = build_index(dir, &GeometryConfig::default()).with_context(|| format!("indexing {}", dir.display()))?;
    writeln!(
        out,
        "{:<24} {:<28} {:>10} {:>14} {:>14} {:>14}",
        "id", "file", "height_m", "footprint_m2", "envelope_m2", "volume_m3"
    )?;
    for e in set.index_entries() {
        writeln!(
            out,
            "{:<24} {:<28} {:>10.2} {:>14.2} {:>14.2} {:>13.2}{}",
            e.id,
            e.file,
            e.height_m,
            e.footprint_area_m2,
            e.envelope_area_m2,
            e.volume_m3,
            if e.volume_approximate { "~" } else { " " }
        )?;
    }
    let [x0, y0, x1, y1] = set.domain_bbox;
    writeln!(
        out,
        "{} buildings; domain [{x0:.1}, {y0:.1}, {x1:.1}, {y1:.1}] m",
        set.buildings.len()
    )?;
    Ok(())
}

pub fn epw(file: &Path, out: &mut impl Write) -> anyhow::Result<()> {
    let epw = parse_epw(file).with_context(|| format!("reading {}", file.display()))?;
    let s = &epw.site;
    writeln!(
        out,
        "site: {} lat {:.3} lon {:.3} alt {:.1} m UTC{:+}",
        s.name, s.latitude, s.longitude, s.altitude, s.utc_offset
    )?;
    writeln!(
        out,
        "rows: {}{}",
        epw.records.len(),
        if epw.is_full_year() { " (full year)" } else { "" }
    )?;
    writeln!(
        out,
        "{:<20} {:>8} {:>10} {:>10} {:>10}",
        "field", "present", "min", "mean", "max"
    )?;
    for f in WeatherField::ALL {
        let vals: Vec<f64> = epw.records.iter().filter_map(|r| r.get(f)).collect();
        if vals.is_empty() {
            writeln!(out, "{:<20} {:>8} {:>10} {:>10} {:>10}", f.key(), 0, "-", "-", "-")?;
            continue;
        }
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        writeln!(
            out,
            "{:<20} {:>8} {:>10.2} {:>10.2} {:>10.2}",
            f.key(),
            vals.len(),
            min,
            mean,
            max
        )?;
    }
    Ok(())
}

pub fn snapshot(file: &Path, out: &mut impl Write) -> anyhow::Result<()> {
    let p = ResolvedParams::load_snapshot(file).with_context(|| format!("reading {}", file.display()))?;
    writeln!(out, "{:<28} {:<30} {:<9} source", "field", "value", "level")?;
    for (k, v) in &p.fields {
        writeln!(
            out,
            "{:<28} {:<30} {:<9} {}",
            k,
            v.value.to_string(),
            v.level.name(),
            v.source
        )?;
    }
    Ok(())
}
