//! Synthetic inputs for demos and tests: a tropical climate year and the
//! east–west street-canyon district.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::geometry::{box_mesh, write_binary_stl, Building, BuildingSet, GeometryConfig, GeometryError, Vec3};
use crate::weather::{extraterrestrial_irradiance, solar_position_at, SiteLocation};

/// Plan domain of the canyon fixture, metres.
pub const CANYON_DOMAIN: [f64; 4] = [0.0, 0.0, 200.0, 200.0];
/// Mid-canyon pedestrian point.
pub const CANYON_CENTRE: [f64; 2] = [100.0, 100.0];
pub const CANYON_HEIGHT: f64 = 30.0;
pub const CANYON_WIDTH: f64 = 20.0;

/// Two 120 m × 20 m × 30 m slabs running east–west with a 20 m street between.
pub fn canyon_boxes() -> [(&'static str, Vec3, Vec3); 2] {
    let (x0, x1) = (40.0, 160.0);
    let half = CANYON_WIDTH / 2.0;
    let c = CANYON_CENTRE[1];
    [
        (
            "south_slab",
            Vec3::new(x0, c - half - 20.0, 0.0),
            Vec3::new(x1, c - half, CANYON_HEIGHT),
        ),
        (
            "north_slab",
            Vec3::new(x0, c + half, 0.0),
            Vec3::new(x1, c + half + 20.0, CANYON_HEIGHT),
        ),
    ]
}

/// Writes the canyon slabs as binary STL files into `dir`.
pub fn write_canyon_stls(dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, lo, hi) in canyon_boxes() {
        let f = io::BufWriter::new(std::fs::File::create(dir.join(format!("{name}.stl")))?);
        write_binary_stl(&box_mesh(lo, hi), name, f)?;
    }
    Ok(())
}

/// The canyon slabs as an in-memory building set on [`CANYON_DOMAIN`].
pub fn canyon_building_set(cell_size: f64) -> Result<BuildingSet, GeometryError> {
    let buildings = canyon_boxes()
        .into_iter()
        .map(|(name, lo, hi)| Building::from_mesh(name, format!("{name}.stl"), box_mesh(lo, hi), cell_size))
        .collect::<Result<Vec<_>, _>>()?;
    let config = GeometryConfig {
        cell_size,
        domain: Some(CANYON_DOMAIN),
        ..GeometryConfig::default()
    };
    BuildingSet::from_buildings(buildings, &config)
}

/// A deterministic 8760-hour EPW for a humid tropical site. Air temperature
/// swings about 25.5–31.5 °C with the minimum near dawn, humidity moves
/// opposite to it (60–90 %), winds are light southerlies, and the sky is hazy
/// (noon DNI near 200 W/m², DHI near 450 W/m²). DNI, DHI and GHI close at
/// the hour midpoint up to the 0.1 W/m² rounding of the file.
pub fn synthetic_tropical_epw(site: &SiteLocation) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "LOCATION,{},-,SYN,Synthetic,999999,{},{},{},{}",
        if site.name.is_empty() { "SYNTHETIC" } else { &site.name },
        site.latitude,
        site.longitude,
        site.utc_offset,
        site.altitude
    );
    for line in [
        "DESIGN CONDITIONS,0",
        "TYPICAL/EXTREME PERIODS,0",
        "GROUND TEMPERATURES,0",
        "HOLIDAYS/DAYLIGHT SAVINGS,No,0,0,0",
        "COMMENTS 1,Synthetic tropical year",
        "COMMENTS 2,Generated deterministically",
        "DATA PERIODS,1,1,Data,Sunday, 1/ 1,12/31",
    ] {
        let _ = writeln!(s, "{line}");
    }
    const DAYS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
    let mut doy = 0u32;
    for (m, &nd) in DAYS.iter().enumerate() {
        for d in 1..=nd {
            doy += 1;
            // Gentle seasonal and day-to-day variation without randomness.
            let season = (2.0 * std::f64::consts::PI * (doy as f64 - 120.0) / 365.0).cos();
            let wobble = (doy as f64 * 0.7).sin();
            for h in 1..=24u32 {
                let phase = 2.0 * std::f64::consts::PI * (h as f64 - 0.5 - 15.0) / 24.0;
                let t = 28.5 + 0.5 * season + 0.3 * wobble + 3.0 * phase.cos();
                let rh = (75.0 - 15.0 * phase.cos() - 2.0 * wobble).clamp(0.0, 100.0);
                let ws = 2.5 + 0.5 * phase.cos() + 0.3 * wobble;
                let wd = 180.0 + 20.0 * wobble;
                let sun = solar_position_at(site, doy, h as f64 - 0.5);
                let cz = sun.zenith.to_radians().cos();
                let (dni, dhi) = if cz > 0.0 {
                    let haze = 1.0 + 0.1 * wobble;
                    (
                        (210.0 * haze * cz.powf(0.3)).min(extraterrestrial_irradiance(doy)),
                        460.0 * cz.powf(0.8),
                    )
                } else {
                    (0.0, 0.0)
                };
                let ghi = dni * cz.max(0.0) + dhi;
                let _ = writeln!(
                    s,
                    "1999,{},{d},{h},60,?,{:.1},{:.1},{:.0},100900,{:.0},{:.0},400,{:.1},{:.1},{:.1},0,0,0,0,{:.0},{:.1},5,5,20.0,77777,9,999999999,0,0.2,0,88,0.0,0.0,0.0",
                    m + 1,
                    t,
                    t - 4.0,
                    rh,
                    extraterrestrial_irradiance(doy) * cz.max(0.0),
                    extraterrestrial_irradiance(doy),
                    ghi,
                    dni,
                    dhi,
                    wd,
                    ws,
                );
            }
        }
    }
    s
}
