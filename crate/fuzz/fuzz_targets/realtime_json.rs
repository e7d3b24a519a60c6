#![no_main]

use libfuzzer_sys::fuzz_target;
use microclimate::weather::{parse_realtime_json, RealtimeConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(body) = std::str::from_utf8(data) else { return };
    let _ = parse_realtime_json(body, &RealtimeConfig::default().field_map);
});
