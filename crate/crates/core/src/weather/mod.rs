//! Hourly climate data: EPW parsing, hour selection, solar geometry,
//! irradiance decomposition and the real-time weather client.

mod decompose;
mod epw;
mod realtime;
mod solar;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decompose::{decompose_ghi, extraterrestrial_irradiance, ErbsCoefficients};
pub use epw::{parse_epw, parse_epw_str, write_epw, EpwFile};
pub use realtime::{fetch_realtime, parse_realtime_json, RealtimeClient, RealtimeConfig, RealtimeReading};
pub use solar::{day_of_year, solar_position, solar_position_at, SolarPosition};

#[derive(Debug, Error)]
pub enum WeatherError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed EPW header: {0}")]
    Header(String),
    #[error("line {line}: expected 35 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: field {column} ({name}) is not numeric: {value:?}")]
    NotNumeric {
        line: usize,
        column: usize,
        name: &'static str,
        value: String,
    },
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("EPW file has no data rows")]
    NoData,
    #[error("invalid date {month:02}-{day:02}")]
    InvalidDate { month: u32, day: u32 },
    #[error("no record for {0}")]
    NoMatch(Timestamp),
}

/// Weather quantities tracked per record. Keys double as parameter names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherField {
    AirTemperature,
    RelativeHumidity,
    WindSpeed,
    WindDirection,
    Ghi,
    Dni,
    Dhi,
}

impl WeatherField {
    pub const ALL: [WeatherField; 7] = [
        WeatherField::AirTemperature,
        WeatherField::RelativeHumidity,
        WeatherField::WindSpeed,
        WeatherField::WindDirection,
        WeatherField::Ghi,
        WeatherField::Dni,
        WeatherField::Dhi,
    ];

    pub fn key(self) -> &'static str {
        match self {
            WeatherField::AirTemperature => "air_temperature",
            WeatherField::RelativeHumidity => "relative_humidity",
            WeatherField::WindSpeed => "wind_speed",
            WeatherField::WindDirection => "wind_direction",
            WeatherField::Ghi => "ghi",
            WeatherField::Dni => "dni",
            WeatherField::Dhi => "dhi",
        }
    }

    pub fn from_key(key: &str) -> Option<WeatherField> {
        WeatherField::ALL.into_iter().find(|f| f.key() == key)
    }

    /// Physically admissible range, inclusive.
    pub fn range(self) -> (f64, f64) {
        match self {
            WeatherField::AirTemperature => (-90.0, 60.0),
            WeatherField::RelativeHumidity => (0.0, 100.0),
            WeatherField::WindSpeed => (0.0, 75.0),
            WeatherField::WindDirection => (0.0, 360.0),
            WeatherField::Ghi | WeatherField::Dni | WeatherField::Dhi => (0.0, 1500.0),
        }
    }

    pub fn in_range(self, v: f64) -> bool {
        let (lo, hi) = self.range();
        // 360° is the same bearing as 0° but is not a valid stored value.
        v.is_finite() && v >= lo && v <= hi && !(self == WeatherField::WindDirection && v >= 360.0)
    }
}

impl fmt::Display for WeatherField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSource {
    Climate,
    /// Computed from other fields, e.g. DNI/DHI from GHI.
    Derived,
    Realtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcedValue {
    pub value: f64,
    pub source: FieldSource,
}

/// Local civil time in EPW labelling: `hour` 1–24 names the hour ending at
/// that clock time, so hour 13 covers 12:00–13:00.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Timestamp {
    pub month: u32,
    pub day: u32,
    pub hour: u32,
}

impl Timestamp {
    pub fn new(month: u32, day: u32, hour: u32) -> Result<Timestamp, WeatherError> {
        check_date(month, day)?;
        if !(1..=24).contains(&hour) {
            return Err(WeatherError::Row {
                line: 0,
                message: format!("hour {hour} outside 1..24"),
            });
        }
        Ok(Timestamp { month, day, hour })
    }

    /// Start of the interval on a 0–23 clock.
    pub fn start_hour(self) -> u32 {
        self.hour - 1
    }

    /// Interval midpoint in local decimal hours.
    pub fn mid_hour(self) -> f64 {
        self.hour as f64 - 0.5
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}-{:02} hour {:02}", self.month, self.day, self.hour)
    }
}

/// Validates month/day against a leap year, since the file year is ignored.
pub fn check_date(month: u32, day: u32) -> Result<NaiveDate, WeatherError> {
    NaiveDate::from_ymd_opt(2000, month, day).ok_or(WeatherError::InvalidDate { month, day })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteLocation {
    #[serde(default)]
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
    pub utc_offset: f64,
}

impl SiteLocation {
    /// Singapore Changi, the default site.
    pub fn changi() -> SiteLocation {
        SiteLocation {
            name: "SINGAPORE".into(),
            latitude: 1.37,
            longitude: 103.98,
            altitude: 16.0,
            utc_offset: 8.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.latitude.abs() <= 90.0) {
            return Err(format!("latitude {} outside [-90, 90]", self.latitude));
        }
        if !(self.longitude.abs() <= 180.0) {
            return Err(format!("longitude {} outside [-180, 180]", self.longitude));
        }
        if !(self.utc_offset.abs() <= 14.0) {
            return Err(format!("utc offset {} outside [-14, 14]", self.utc_offset));
        }
        Ok(())
    }
}

/// One hour of weather. Absent fields were missing in the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherRecord {
    pub year: i32,
    pub timestamp: Timestamp,
    pub minute: u32,
    pub fields: BTreeMap<WeatherField, SourcedValue>,
}

impl WeatherRecord {
    pub fn new(year: i32, timestamp: Timestamp) -> Self {
        WeatherRecord {
            year,
            timestamp,
            minute: 0,
            fields: BTreeMap::new(),
        }
    }

    pub fn get(&self, f: WeatherField) -> Option<f64> {
        self.fields.get(&f).map(|v| v.value)
    }

    pub fn set(&mut self, f: WeatherField, value: f64, source: FieldSource) {
        self.fields.insert(f, SourcedValue { value, source });
    }

    /// True when any field was a missing-value sentinel.
    pub fn is_flagged(&self) -> bool {
        self.fields.len() < WeatherField::ALL.len()
    }

    /// Fills DNI/DHI from GHI when either is absent and GHI is present.
    pub fn fill_irradiance(&mut self, site: &SiteLocation, coeffs: &ErbsCoefficients) {
        if self.get(WeatherField::Dni).is_some() && self.get(WeatherField::Dhi).is_some() {
            return;
        }
        let Some(ghi) = self.get(WeatherField::Ghi) else { return };
        let doy = day_of_year(self.year, self.timestamp.month, self.timestamp.day);
        let sun = solar_position_at(site, doy, self.timestamp.mid_hour());
        let (dni, dhi) = decompose_ghi(ghi, sun.zenith, extraterrestrial_irradiance(doy), coeffs);
        self.set(WeatherField::Dni, dni, FieldSource::Derived);
        self.set(WeatherField::Dhi, dhi, FieldSource::Derived);
    }
}

/// The unique record matching month, day and EPW hour (year ignored).
pub fn select_hour(records: &[WeatherRecord], ts: Timestamp) -> Result<&WeatherRecord, WeatherError> {
    check_date(ts.month, ts.day)?;
    records
        .iter()
        .find(|r| r.timestamp == ts)
        .ok_or(WeatherError::NoMatch(ts))
}

/// All hours of one day in file order.
pub fn select_day(records: &[WeatherRecord], month: u32, day: u32) -> Result<Vec<WeatherRecord>, WeatherError> {
    check_date(month, day)?;
    let out: Vec<WeatherRecord> = records
        .iter()
        .filter(|r| r.timestamp.month == month && r.timestamp.day == day)
        .cloned()
        .collect();
    if out.is_empty() {
        return Err(WeatherError::NoMatch(Timestamp { month, day, hour: 1 }));
    }
    Ok(out)
}

/// Summary used by `inspect`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeatherSummary {
    pub rows: usize,
    pub full_year: bool,
    /// Fraction of rows carrying each field.
    pub coverage: BTreeMap<WeatherField, f64>,
}

pub fn summarize(records: &[WeatherRecord]) -> WeatherSummary {
    let n = records.len();
    let coverage = WeatherField::ALL
        .into_iter()
        .map(|f| {
            let c = records.iter().filter(|r| r.get(f).is_some()).count();
            (f, if n > 0 { c as f64 / n as f64 } else { 0.0 })
        })
        .collect();
    WeatherSummary {
        rows: n,
        full_year: n == 8760 || n == 8784,
        coverage,
    }
}

/// Ordinal day; Feb 29 in a non-leap file year falls back to a leap year.
pub(crate) fn ordinal(year: i32, month: u32, day: u32) -> u32 {
    NaiveDate::from_ymd_opt(year, month, day)
        .or_else(|| NaiveDate::from_ymd_opt(2000, month, day))
        .map(|d| d.ordinal())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feb_30_is_invalid() {
        assert!(matches!(
            select_hour(
                &[],
                Timestamp {
                    month: 2,
                    day: 30,
                    hour: 1
                }
            ),
            Err(WeatherError::InvalidDate { .. })
        ));
        assert!(Timestamp::new(2, 29, 12).is_ok());
    }

    #[test]
    fn wind_direction_range_is_half_open() {
        assert!(WeatherField::WindDirection.in_range(359.9));
        assert!(!WeatherField::WindDirection.in_range(360.0));
        assert!(!WeatherField::RelativeHumidity.in_range(140.0));
    }

    #[test]
    fn timestamp_convention() {
        let t = Timestamp::new(4, 20, 13).unwrap();
        assert_eq!(t.start_hour(), 12);
        assert_eq!(t.mid_hour(), 12.5);
    }
}
