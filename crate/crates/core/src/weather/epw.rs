//! EPW (IWEC layout) reader and writer.

use std::fmt::Write as _;
use std::path::Path;

use super::{FieldSource, SiteLocation, Timestamp, WeatherError, WeatherField, WeatherRecord};

const HEADER_LINES: usize = 8;
const ROW_FIELDS: usize = 35;

/// Column index, name, field, and the smallest value treated as "missing".
const COLUMNS: [(usize, &str, WeatherField, f64); 7] = [
    (6, "dry bulb temperature", WeatherField::AirTemperature, 99.9),
    (8, "relative humidity", WeatherField::RelativeHumidity, 999.0),
    (13, "global horizontal radiation", WeatherField::Ghi, 9999.0),
    (14, "direct normal radiation", WeatherField::Dni, 9999.0),
    (15, "diffuse horizontal radiation", WeatherField::Dhi, 9999.0),
    (20, "wind direction", WeatherField::WindDirection, 999.0),
    (21, "wind speed", WeatherField::WindSpeed, 999.0),
];

#[derive(Debug, Clone, PartialEq)]
pub struct EpwFile {
    pub site: SiteLocation,
    /// The eight header lines, verbatim.
    pub header: Vec<String>,
    pub records: Vec<WeatherRecord>,
}

impl EpwFile {
    pub fn is_full_year(&self) -> bool {
        matches!(self.records.len(), 8760 | 8784)
    }
}

pub fn parse_epw(path: impl AsRef<Path>) -> Result<EpwFile, WeatherError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| WeatherError::Read {
        path: path.display().to_string(),
        source,
    })?;
    // IWEC files are occasionally Latin-1 in the comment lines.
    parse_epw_str(&String::from_utf8_lossy(&bytes))
}

fn parse_location(line: &str) -> Result<SiteLocation, WeatherError> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.first().map(|s| s.to_ascii_uppercase()) != Some("LOCATION".into()) {
        return Err(WeatherError::Header("first line must start with LOCATION".into()));
    }
    if f.len() < 10 {
        return Err(WeatherError::Header(format!(
            "LOCATION has {} fields, need 10",
            f.len()
        )));
    }
    let num = |k: usize, name: &str| -> Result<f64, WeatherError> {
        f[k].parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| WeatherError::Header(format!("LOCATION {name} {:?} is not numeric", f[k])))
    };
    let site = SiteLocation {
        name: f[1].to_string(),
        latitude: num(6, "latitude")?,
        longitude: num(7, "longitude")?,
        utc_offset: num(8, "time zone")?,
        altitude: num(9, "elevation")?,
    };
    site.validate().map_err(WeatherError::Header)?;
    Ok(site)
}

fn parse_int(fields: &[&str], line: usize, column: usize, name: &'static str) -> Result<i64, WeatherError> {
    fields[column]
        .trim()
        .parse::<i64>()
        .map_err(|_| WeatherError::NotNumeric {
            line,
            column,
            name,
            value: fields[column].to_string(),
        })
}

pub fn parse_epw_str(text: &str) -> Result<EpwFile, WeatherError> {
    let mut lines = text.lines().enumerate();
    let mut header = Vec::with_capacity(HEADER_LINES);
    for _ in 0..HEADER_LINES {
        match lines.next() {
            Some((_, l)) => header.push(l.to_string()),
            None => {
                return Err(WeatherError::Header(format!(
                    "expected {HEADER_LINES} header lines, found {}",
                    header.len()
                )))
            }
        }
    }
    let site = parse_location(&header[0])?;

    let mut records = Vec::new();
    for (i, l) in lines {
        let line = i + 1;
        if l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != ROW_FIELDS {
            return Err(WeatherError::FieldCount { line, found: f.len() });
        }
        let year = parse_int(&f, line, 0, "year")?;
        let month = parse_int(&f, line, 1, "month")?;
        let day = parse_int(&f, line, 2, "day")?;
        let hour = parse_int(&f, line, 3, "hour")?;
        let minute = parse_int(&f, line, 4, "minute")?;
        let bad = |message: String| WeatherError::Row { line, message };
        let (Ok(month), Ok(day), Ok(hour), Ok(minute), Ok(year)) = (
            u32::try_from(month),
            u32::try_from(day),
            u32::try_from(hour),
            u32::try_from(minute),
            i32::try_from(year),
        ) else {
            return Err(bad("date field out of range".into()));
        };
        let ts = Timestamp::new(month, day, hour).map_err(|e| bad(e.to_string()))?;
        let mut rec = WeatherRecord::new(year, ts);
        rec.minute = minute;
        for (col, name, field, sentinel) in COLUMNS {
            let raw = f[col].trim();
            let v: f64 = raw.parse().map_err(|_| WeatherError::NotNumeric {
                line,
                column: col,
                name,
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(WeatherError::NotNumeric {
                    line,
                    column: col,
                    name,
                    value: raw.to_string(),
                });
            }
            if v >= sentinel {
                continue;
            }
            let v = if field == WeatherField::WindDirection && v == 360.0 {
                0.0
            } else {
                v
            };
            // Physically impossible values are treated like sentinels.
            if field.in_range(v) {
                rec.set(field, v, FieldSource::Climate);
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(WeatherError::NoData);
    }
    Ok(EpwFile { site, header, records })
}

/// Serializes with the original header. Retained fields are written with
/// shortest round-trip formatting; missing ones as EPW sentinels; columns
/// this crate does not read get EPW missing defaults.
pub fn write_epw(file: &EpwFile) -> String {
    // Missing-value codes for all 35 columns from index 6 on (IWEC layout).
    const FILL: [&str; 29] = [
        "99.9",
        "99.9",
        "999",
        "999999",
        "9999",
        "9999",
        "9999",
        "9999",
        "9999",
        "9999",
        "999999",
        "999999",
        "999999",
        "9999",
        "999",
        "999",
        "99.9",
        "99",
        "99",
        "9999",
        "99999",
        "9",
        "999999999",
        "999",
        "0.999",
        "999",
        "99",
        "999",
        "99",
    ];
    let mut s = String::new();
    for h in &file.header {
        s.push_str(h);
        s.push('\n');
    }
    for r in &file.records {
        let mut cols: Vec<String> = vec![
            r.year.to_string(),
            r.timestamp.month.to_string(),
            r.timestamp.day.to_string(),
            r.timestamp.hour.to_string(),
            r.minute.to_string(),
            "?".into(),
        ];
        cols.extend(FILL.iter().map(|s| s.to_string()));
        for (col, _, field, _) in COLUMNS {
            if let Some(v) = r.get(field) {
                cols[col] = format!("{v}");
            }
        }
        let _ = writeln!(s, "{}", cols.join(","));
    }
    s
}
