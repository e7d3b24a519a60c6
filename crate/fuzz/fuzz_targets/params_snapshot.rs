#![no_main]

use libfuzzer_sys::fuzz_target;
use microclimate::params::ResolvedParams;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = ResolvedParams::from_json(text) {
        let again = ResolvedParams::from_json(&p.to_json()).expect("snapshot re-reads");
        assert_eq!(again, p);
    }
});
