#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = graspkit::scene::parse_scene_yaml(text) {
        // a document that passed the schema check converts and re-parses
        let scene = doc.into_scene(None).expect("checked document converts");
        let again = graspkit::scene::SceneDocument::from_scene(&scene, None).to_yaml();
        graspkit::scene::parse_scene_yaml(&again).expect("written scene re-parses");
    }
});
