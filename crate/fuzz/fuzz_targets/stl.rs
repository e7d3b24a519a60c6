#![no_main]

use libfuzzer_sys::fuzz_target;
use microclimate::geometry::{clean_mesh, parse_stl};

fuzz_target!(|data: &[u8]| {
    if let Ok(mesh) = parse_stl(data) {
        let _ = clean_mesh(&mesh, 1e-6);
    }
});
