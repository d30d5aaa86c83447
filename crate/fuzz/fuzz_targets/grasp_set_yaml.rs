#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = graspkit::graspgen::parse_grasp_set_yaml(text) {
        let _ = doc.into_set();
    }
});
