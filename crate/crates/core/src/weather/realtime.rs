//! Generic JSON-over-HTTP weather client. Any provider can be adapted by
//! mapping JSON pointers in its response to weather fields.

use std::collections::BTreeMap;
use std::time::Duration;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{SiteLocation, WeatherField};

pub const ENV_URL: &str = "MICROCLIMATE_REALTIME_URL";
pub const ENV_TIMEOUT: &str = "MICROCLIMATE_REALTIME_TIMEOUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RealtimeConfig {
    /// Endpoint; `{lat}` and `{lon}` are substituted with the site coordinates.
    pub url: Option<String>,
    pub timeout_s: f64,
    /// JSON pointer (or top-level key) → field.
    pub field_map: BTreeMap<String, WeatherField>,
}

impl Default for RealtimeConfig {
    fn default() -> Self {
        RealtimeConfig {
            url: None,
            timeout_s: 5.0,
            field_map: WeatherField::ALL
                .into_iter()
                .map(|f| (format!("/{}", f.key()), f))
                .collect(),
        }
    }
}

impl RealtimeConfig {
    /// Applies `MICROCLIMATE_REALTIME_URL` / `MICROCLIMATE_REALTIME_TIMEOUT`.
    pub fn with_env(mut self) -> Self {
        if let Ok(u) = std::env::var(ENV_URL) {
            if !u.trim().is_empty() {
                self.url = Some(u);
            }
        }
        if let Ok(t) = std::env::var(ENV_TIMEOUT) {
            match t.trim().parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => self.timeout_s = v,
                _ => warn!("ignoring {ENV_TIMEOUT}={t:?}: not a positive number"),
            }
        }
        self
    }
}

/// Fields returned by the service, plus any it sent that failed validation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RealtimeReading {
    pub values: BTreeMap<WeatherField, f64>,
    pub rejected: Vec<(WeatherField, f64)>,
    pub warning: Option<String>,
}

impl RealtimeReading {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Extracts mapped fields from a response body. Values outside their
/// physical range are dropped into `rejected`; missing or non-numeric
/// entries are skipped. Only malformed JSON is an error.
pub fn parse_realtime_json(body: &str, field_map: &BTreeMap<String, WeatherField>) -> Result<RealtimeReading, String> {
    let doc: serde_json::Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
    let mut out = RealtimeReading::default();
    for (ptr, &field) in field_map {
        let node = if ptr.starts_with('/') || ptr.is_empty() {
            doc.pointer(ptr)
        } else {
            doc.get(ptr)
        };
        let Some(v) = node.and_then(serde_json::Value::as_f64) else {
            continue;
        };
        if field.in_range(v) {
            out.values.insert(field, v);
        } else {
            out.rejected.push((field, v));
        }
    }
    Ok(out)
}

pub struct RealtimeClient {
    pub config: RealtimeConfig,
}

impl RealtimeClient {
    pub fn new(config: RealtimeConfig) -> Self {
        RealtimeClient { config }
    }

    fn get(&self, url: &str) -> Result<String, String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(self.config.timeout_s.max(0.001))))
            .build()
            .into();
        let mut resp = agent.get(url).call().map_err(|e| e.to_string())?;
        resp.body_mut().read_to_string().map_err(|e| e.to_string())
    }

    /// Soft-failing fetch: any error yields an empty reading with a warning.
    pub fn fetch(&self, site: &SiteLocation) -> RealtimeReading {
        let Some(template) = &self.config.url else {
            return RealtimeReading::default();
        };
        let url = template
            .replace("{lat}", &site.latitude.to_string())
            .replace("{lon}", &site.longitude.to_string());
        let result = self
            .get(&url)
            .and_then(|body| parse_realtime_json(&body, &self.config.field_map));
        match result {
            Ok(r) => {
                for (f, v) in &r.rejected {
                    warn!("realtime weather: rejected {f} = {v} (out of range)");
                }
                r
            }
            Err(e) => {
                let msg = format!("realtime weather unavailable ({url}): {e}");
                warn!("{msg}");
                RealtimeReading {
                    warning: Some(msg),
                    ..Default::default()
                }
            }
        }
    }
}

pub fn fetch_realtime(client: &RealtimeClient, site: &SiteLocation) -> RealtimeReading {
    client.fetch(site)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// Serves one HTTP response on a local port and returns the base URL.
    fn serve_once(status: &str, body: &str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        std::thread::spawn(move || {
            if let Ok((mut s, _)) = listener.accept() {
                let mut buf = [0u8; 4096];
                let _ = s.read(&mut buf);
                let _ = s.write_all(response.as_bytes());
            }
        });
        format!("http://{addr}/obs?lat={{lat}}&lon={{lon}}")
    }

    fn client(url: String) -> RealtimeClient {
        RealtimeClient::new(RealtimeConfig {
            url: Some(url),
            timeout_s: 2.0,
            ..Default::default()
        })
    }

    #[test]
    fn passes_through_provided_fields() {
        let url = serve_once("200 OK", r#"{"air_temperature": 31.2, "wind_speed": 3.4}"#);
        let r = fetch_realtime(&client(url), &SiteLocation::changi());
        assert_eq!(r.values.len(), 2);
        assert_eq!(r.values[&WeatherField::AirTemperature], 31.2);
        assert_eq!(r.values[&WeatherField::WindSpeed], 3.4);
        assert!(r.warning.is_none());
    }

    #[test]
    fn out_of_range_rh_rejected() {
        let url = serve_once("200 OK", r#"{"relative_humidity": 140, "air_temperature": 30}"#);
        let r = fetch_realtime(&client(url), &SiteLocation::changi());
        assert_eq!(
            r.values.keys().copied().collect::<Vec<_>>(),
            [WeatherField::AirTemperature]
        );
        assert_eq!(r.rejected, [(WeatherField::RelativeHumidity, 140.0)]);
    }

    #[test]
    fn unreachable_endpoint_is_soft() {
        // Bind then drop so the port is closed.
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let r = fetch_realtime(&client(format!("http://127.0.0.1:{port}/")), &SiteLocation::changi());
        assert!(r.is_empty());
        assert!(r.warning.is_some());
    }

    #[test]
    fn server_error_is_soft() {
        let url = serve_once("503 Service Unavailable", "{}");
        let r = fetch_realtime(&client(url), &SiteLocation::changi());
        assert!(r.is_empty() && r.warning.is_some());
    }

    #[test]
    fn nested_pointer_mapping() {
        let map = BTreeMap::from([
            ("/data/temp".to_string(), WeatherField::AirTemperature),
            ("rh".to_string(), WeatherField::RelativeHumidity),
        ]);
        let r = parse_realtime_json(r#"{"data": {"temp": 29.5}, "rh": "n/a"}"#, &map).unwrap();
        assert_eq!(r.values.len(), 1);
        assert!(parse_realtime_json("{", &map).is_err());
    }
}
