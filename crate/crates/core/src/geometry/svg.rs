//! Plan-view index map: one outline and one ID label per building.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BuildingSet, GeometryError};

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the index map as an SVG string. User units are metres; the
/// y axis is flipped so north is up. Axes are drawn as lines only, so the
/// document holds exactly one `<polygon>` and one `<text>` per building.
pub fn render_index_svg(set: &BuildingSet) -> Result<String, GeometryError> {
    if set.buildings.is_empty() {
        return Err(GeometryError::Config("index map needs at least one building".into()));
    }
    let d = set.domain_bbox;
    let (w, h) = (d[2] - d[0], d[3] - d[1]);
    let font = (w.max(h) / 80.0).max(1.0);
    let stroke = (w.max(h) / 1000.0).max(0.05);
    // Plan (x, y) maps to SVG (x, maxy + miny - y).
    let fy = |y: f64| d[3] + d[1] - y;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}" width="800" height="{:.0}">"#,
        d[0],
        d[1],
        w,
        h,
        800.0 * h / w
    );
    let _ = writeln!(
        s,
        "<desc>Building index map; coordinates in metres, x east, y north.</desc>"
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#f4f4f0" stroke="none"/>"##,
        d[0], d[1], w, h
    );
    // Axes along the south and west domain edges with 100 m ticks.
    let _ = writeln!(s, r##"<g stroke="#555" stroke-width="{stroke:.3}">"##);
    let _ = writeln!(
        s,
        r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
        d[0],
        fy(d[1]),
        d[2],
        fy(d[1])
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
        d[0],
        fy(d[1]),
        d[0],
        fy(d[3])
    );
    let tick = 100.0;
    let tl = font * 0.6;
    let mut x = (d[0] / tick).ceil() * tick;
    while x <= d[2] {
        let _ = writeln!(
            s,
            r#"<line x1="{x:.3}" y1="{:.3}" x2="{x:.3}" y2="{:.3}"/>"#,
            fy(d[1]),
            fy(d[1]) - tl
        );
        x += tick;
    }
    let mut y = (d[1] / tick).ceil() * tick;
    while y <= d[3] {
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            d[0],
            fy(y),
            d[0] + tl,
            fy(y)
        );
        y += tick;
    }
    let _ = writeln!(s, "</g>");

    for b in &set.buildings {
        let pts: Vec<String> = b
            .footprint
            .outline
            .iter()
            .map(|p| format!("{:.3},{:.3}", p[0], fy(p[1])))
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon id="{}" points="{}" fill="#c9c3b6" stroke="#333" stroke-width="{stroke:.3}"/>"##,
            escape(&b.id),
            pts.join(" ")
        );
    }
    for b in &set.buildings {
        let [cx, cy] = b.footprint.centroid;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.3}" y="{:.3}" font-size="{font:.3}" text-anchor="middle" dominant-baseline="middle">{}</text>"#,
            fy(cy),
            escape(&b.id)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_index_map(set: &BuildingSet, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    fs::write(path, render_index_svg(set)?)?;
    Ok(())
}
