#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = graspkit::printout::parse_marker_dictionary(data);
});
