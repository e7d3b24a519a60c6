#![no_main]

use libfuzzer_sys::fuzz_target;
use microclimate::params::{merge, parse_partial, PartialParams, ProvenanceLevel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(user) = parse_partial(text, ProvenanceLevel::User, "fuzz") {
        let empty = |l| PartialParams::new(l);
        let _ = merge(
            &PartialParams::defaults(),
            &empty(ProvenanceLevel::Climate),
            &empty(ProvenanceLevel::Realtime),
            &empty(ProvenanceLevel::Advisor),
            &user,
        );
    }
});
