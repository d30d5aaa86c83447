#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(mesh) = graspkit::geom::parse_stl(data) {
        let n = mesh.vertices().len();
        assert!(mesh.triangles().iter().flatten().all(|&i| (i as usize) < n));
    }
});
