#![no_main]

use libfuzzer_sys::fuzz_target;
use microclimate::orchestrator::{IntentResponse, MaterialsResponse, ReportResponse};

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<IntentResponse>(data);
    let _ = serde_json::from_slice::<MaterialsResponse>(data);
    let _ = serde_json::from_slice::<ReportResponse>(data);
});
