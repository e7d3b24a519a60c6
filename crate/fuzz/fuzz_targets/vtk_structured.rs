#![no_main]

use libfuzzer_sys::fuzz_target;
use microclimate::outputs::parse_vtk_structured;

fuzz_target!(|data: &[u8]| {
    let _ = parse_vtk_structured(&String::from_utf8_lossy(data));
});
