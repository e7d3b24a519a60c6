#![no_main]

use libfuzzer_sys::fuzz_target;
use microclimate::weather::{parse_epw_str, select_day};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    if let Ok(epw) = parse_epw_str(&text) {
        let _ = select_day(&epw.records, 4, 20);
    }
});
