//! `scene.yaml` reader and writer; the JSON form uses the same document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ObjectInstance, Scene};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::printout::MarkerBoardSpec;
use crate::textfmt::{from_json, from_yaml, pose_to_floats, sig9, to_yaml};

pub const SCENE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    pub version: u32,
    /// Relative paths resolve against the scene file's directory.
    pub object_library: String,
    pub ground_area: [f64; 2],
    #[serde(default)]
    pub objects: Vec<InstanceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub board: Option<MarkerBoardSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceEntry {
    pub object_type: String,
    /// Row-major 4x4 homogeneous matrix.
    pub pose: Vec<f64>,
}

fn check(doc: SceneDocument) -> Result<SceneDocument> {
    if doc.version != SCENE_VERSION {
        return Err(Error::schema(
            "version",
            format!("unsupported version {}, expected {SCENE_VERSION}", doc.version),
        ));
    }
    if !doc.ground_area.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(Error::schema("ground_area", "width and depth must be positive"));
    }
    for (i, obj) in doc.objects.iter().enumerate() {
        Pose::from_row_major(&obj.pose).map_err(|e| match e {
            Error::SchemaViolation { message, .. } => Error::schema(format!("objects[{i}].pose"), message),
            other => other,
        })?;
    }
    if let Some(board) = &doc.board {
        board.validate().map_err(|e| Error::schema("board", e.to_string()))?;
    }
    Ok(doc)
}

/// Parses and schema-checks a scene document. Object ids are checked later,
/// against a library.
pub fn parse_scene_yaml(text: &str) -> Result<SceneDocument> {
    check(from_yaml(text)?)
}

pub fn parse_scene_json(text: &str) -> Result<SceneDocument> {
    check(from_json(text)?)
}

impl SceneDocument {
    /// With `base_dir`, the library path is written relative to it.
    pub fn from_scene(scene: &Scene, base_dir: Option<&Path>) -> SceneDocument {
        let lib = match base_dir {
            Some(dir) => {
                let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
                pathdiff::diff_paths(abs(&scene.library_ref), abs(dir)).unwrap_or_else(|| scene.library_ref.clone())
            }
            None => scene.library_ref.clone(),
        };
        SceneDocument {
            version: SCENE_VERSION,
            object_library: lib.to_string_lossy().replace('\\', "/"),
            ground_area: scene.ground_area.map(sig9),
            objects: scene
                .instances
                .iter()
                .map(|i| InstanceEntry {
                    object_type: i.object_id.clone(),
                    pose: pose_to_floats(&i.pose),
                })
                .collect(),
            board: scene.board.clone(),
        }
    }

    /// With `base_dir`, a relative library path is joined onto it.
    pub fn into_scene(self, base_dir: Option<&Path>) -> Result<Scene> {
        let doc = check(self)?;
        let lib = PathBuf::from(&doc.object_library);
        let library_ref = match base_dir {
            Some(dir) if lib.is_relative() => dir.join(lib),
            _ => lib,
        };
        let instances = doc
            .objects
            .iter()
            .map(|o| Ok(ObjectInstance::new(o.object_type.clone(), Pose::from_row_major(&o.pose)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene {
            ground_area: doc.ground_area,
            instances,
            library_ref,
            board: doc.board,
        })
    }

    pub fn to_yaml(&self) -> String {
        to_yaml(self)
    }
}

fn parent_dir(path: &Path) -> &Path {
    path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let doc = SceneDocument::from_scene(scene, Some(parent_dir(path)));
    std::fs::write(path, doc.to_yaml()).map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene_yaml(&text)?.into_scene(Some(parent_dir(path)))
}

#[cfg(test)]
mod tests {
    use super::super::tests::desk_library;
    use super::super::{random_scene, validate_scene, RandomSceneParams};
    use super::*;
    use crate::objectlib::{load_library, save_library};

    #[test]
    fn round_trip_six_objects() {
        let lib = desk_library();
        let params = RandomSceneParams { n: 6, k: 50, seed: 11 };
        let mut scene = random_scene(&lib, &params, [0.594, 0.42], "lib.yaml").unwrap();
        assert_eq!(scene.instances.len(), 6);
        scene.board = Some(MarkerBoardSpec::default());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.yaml");
        save_scene(&scene, &path).unwrap();
        let back = load_scene(&path).unwrap();
        assert_eq!(back.ground_area, scene.ground_area);
        assert_eq!(back.board, scene.board);
        assert_eq!(back.instances.len(), 6);
        for (a, b) in scene.instances.iter().zip(&back.instances) {
            assert_eq!(a.object_id, b.object_id);
            assert!(a.pose.max_abs_diff(&b.pose) < 1e-8);
        }
        assert_eq!(validate_scene(&scene, &lib).unwrap(), validate_scene(&back, &lib).unwrap());
        // saving the loaded scene again is stable at the declared precision
        let first = std::fs::read_to_string(&path).unwrap();
        let again = SceneDocument::from_scene(&back, Some(dir.path()));
        let reparsed = parse_scene_yaml(&again.to_yaml()).unwrap();
        let original = parse_scene_yaml(&first).unwrap();
        for (a, b) in original.objects.iter().zip(&reparsed.objects) {
            for (x, y) in a.pose.iter().zip(&b.pose) {
                assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn version_and_pose_checks() {
        let good = "version: 1\nobject_library: lib.yaml\nground_area: [0.42, 0.297]\nobjects: []\n";
        assert!(parse_scene_yaml(good).is_ok());
        let v2 = good.replace("version: 1", "version: 2");
        assert!(matches!(parse_scene_yaml(&v2), Err(Error::SchemaViolation { path, .. }) if path == "version"));
        let bad_pose = "version: 1\nobject_library: l\nground_area: [1, 1]\nobjects:\n- object_type: cube\n  pose: [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0]\n";
        match parse_scene_yaml(bad_pose) {
            Err(Error::SchemaViolation { path, message }) => {
                assert_eq!(path, "objects[0].pose");
                assert!(message.contains("16"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let extra = format!("{good}colour: red\n");
        assert!(matches!(parse_scene_yaml(&extra), Err(Error::SchemaViolation { .. })));
        let neg = good.replace("[0.42, 0.297]", "[0.42, -1]");
        assert!(parse_scene_yaml(&neg).is_err());
    }

    #[test]
    fn json_and_yaml_agree() {
        let lib = desk_library();
        let params = RandomSceneParams { n: 4, k: 20, seed: 5 };
        let scene = random_scene(&lib, &params, [0.42, 0.297], "lib.yaml").unwrap();
        let doc = SceneDocument::from_scene(&scene, None);
        let json = serde_json::to_string(&doc).unwrap();
        let from_json = parse_scene_json(&json).unwrap();
        let from_yaml = parse_scene_yaml(&doc.to_yaml()).unwrap();
        assert_eq!(from_json, from_yaml);
        assert_eq!(from_json, doc);
    }

    #[test]
    fn library_path_resolves_against_scene_dir() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("scenes");
        std::fs::create_dir_all(&sub).unwrap();
        let mesh_path = dir.path().join("cube.obj");
        let cube = crate::geom::TriMesh::cuboid(nalgebra::Point3::origin(), nalgebra::Vector3::repeat(0.05));
        std::fs::write(&mesh_path, crate::geom::write_obj(&cube)).unwrap();
        let spec = crate::objectlib::ObjectSpec::new("cube", &mesh_path, 0.1);
        let mut lib = crate::objectlib::ObjectLibrary::new("l");
        lib.insert(crate::objectlib::ObjectType::from_spec(&spec).unwrap()).unwrap();
        let lib_path = dir.path().join("object_library.yaml");
        save_library(&lib, &lib_path).unwrap();
        let scene = Scene::new([0.3, 0.2], &lib_path).unwrap();
        let scene_path = sub.join("s.yaml");
        save_scene(&scene, &scene_path).unwrap();
        let text = std::fs::read_to_string(&scene_path).unwrap();
        assert!(text.contains("object_library: ../object_library.yaml"), "{text}");
        let back = load_scene(&scene_path).unwrap();
        assert_eq!(load_library(&back.library_ref).unwrap().len(), 1);
    }
}
