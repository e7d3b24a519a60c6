#![no_main]

use libfuzzer_sys::fuzz_target;
use microclimate::params::{apply_delta, merge, ParamDelta, PartialParams, ProvenanceLevel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(delta) = ParamDelta::from_json(text) else { return };
    let empty = |l| PartialParams::new(l);
    let base = merge(
        &PartialParams::defaults(),
        &empty(ProvenanceLevel::Climate),
        &empty(ProvenanceLevel::Realtime),
        &empty(ProvenanceLevel::Advisor),
        &empty(ProvenanceLevel::User),
    )
    .expect("built-in defaults merge");
    let _ = apply_delta(&base, &delta);
});
