#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graspkit::geom::{write_obj, Pose, TriMesh};

pub fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graspkit"))
        .current_dir(dir)
        .args(args)
        .env_remove("GRASPKIT_CONFIG")
        .output()
        .expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = bin(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Library with a 5 cm cube and a 6 x 4 x 10 cm box, built through `ingest`.
pub fn desk_library(dir: &Path) -> PathBuf {
    let cube = TriMesh::cuboid([0.0, 0.0, 0.0].into(), [0.05, 0.05, 0.05].into());
    let bx = TriMesh::cuboid([0.0, 0.0, 0.0].into(), [0.06, 0.04, 0.10].into());
    std::fs::write(dir.join("cube.obj"), write_obj(&cube)).unwrap();
    std::fs::write(dir.join("box.obj"), write_obj(&bx)).unwrap();
    ok(dir, &["ingest", "--library", "lib.yaml", "--id", "cube", "--mesh", "cube.obj", "--mass", "0.1"]);
    ok(dir, &["ingest", "--library", "lib.yaml", "--id", "box", "--mesh", "box.obj", "--mass", "0.2"]);
    dir.join("lib.yaml")
}

/// Scene YAML text with cubes resting at the given centres.
pub fn cube_scene(xy: &[(f64, f64)]) -> String {
    let mut s = String::from("version: 1\nobject_library: lib.yaml\nground_area: [0.42, 0.297]\n");
    s += if xy.is_empty() { "objects: []\n" } else { "objects:\n" };
    for (x, y) in xy {
        let p = Pose::from_translation([*x, *y, 0.025].into());
        let m: Vec<String> = p.to_row_major().iter().map(|v| v.to_string()).collect();
        s += &format!("- object_type: cube\n  pose: [{}]\n", m.join(", "));
    }
    s
}

/// CSV rows with the given confusion counts (tn, fn, fp, tp) for one scene.
pub fn confusion_csv(scene: &str, tn: usize, fn_: usize, fp: usize, tp: usize) -> String {
    let mut s = String::new();
    let mut id = 0;
    for (n, sim, real) in [(tn, 0, 0), (fn_, 0, 1), (fp, 1, 0), (tp, 1, 1)] {
        for _ in 0..n {
            s += &format!("{scene},cube,{id},{sim},{real},,0,\n");
            id += 1;
        }
    }
    s
}
