#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = graspkit::scene::parse_scene_json(text) {
        let _ = doc.into_scene(None);
    }
});
