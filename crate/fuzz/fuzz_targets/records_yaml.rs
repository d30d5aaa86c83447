#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = graspkit::graspeval::parse_records_yaml(text) {
        let _ = graspkit::analytics::report(&records);
    }
});
