#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(records) = graspkit::graspeval::parse_records_csv(text) {
        let written = graspkit::graspeval::records_to_csv(&records);
        let back = graspkit::graspeval::parse_records_csv(&written).expect("written records re-parse");
        assert_eq!(back.len(), records.len());
        let _ = graspkit::analytics::report(&records);
    }
});
