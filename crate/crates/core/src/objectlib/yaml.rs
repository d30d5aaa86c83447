//! `object_library.yaml` reader and writer.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{support_polygon, validate_stable_pose, ObjectLibrary, ObjectType, StablePose, DEFAULT_FRICTION};
use crate::error::{Error, Result};
use crate::geom::{load_mesh, mass_properties, Pose};
use crate::hull::polygon_area;
use crate::textfmt::{from_yaml, pose_to_floats, sig9, to_yaml};

pub const LIBRARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryDocument {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub objects: BTreeMap<String, ObjectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    /// Relative paths resolve against the library file's directory.
    pub mesh: String,
    pub mass: f64,
    #[serde(default = "default_friction")]
    pub friction: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub stable_poses: Vec<PoseEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    pub probability: f64,
    /// Row-major 4x4 homogeneous matrix.
    pub pose: Vec<f64>,
}

fn default_friction() -> f64 {
    DEFAULT_FRICTION
}

fn default_scale() -> f64 {
    1.0
}

/// Parses and schema-checks a library document without touching the filesystem.
pub fn parse_library_yaml(text: &str) -> Result<LibraryDocument> {
    let doc: LibraryDocument = from_yaml(text)?;
    if doc.version != LIBRARY_VERSION {
        return Err(Error::schema(
            "version",
            format!("unsupported version {}, expected {LIBRARY_VERSION}", doc.version),
        ));
    }
    for (id, entry) in &doc.objects {
        let at = |field: &str| format!("objects.{id}.{field}");
        for (name, v) in [("mass", entry.mass), ("friction", entry.friction), ("scale", entry.scale)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::schema(at(name), format!("must be positive, got {v}")));
            }
        }
        let mut total = 0.0;
        for (i, p) in entry.stable_poses.iter().enumerate() {
            if !(p.probability > 0.0 && p.probability <= 1.0) {
                return Err(Error::schema(
                    at(&format!("stable_poses[{i}].probability")),
                    format!("must lie in (0, 1], got {}", p.probability),
                ));
            }
            total += p.probability;
            Pose::from_row_major(&p.pose).map_err(|e| match e {
                Error::SchemaViolation { message, .. } => {
                    Error::schema(at(&format!("stable_poses[{i}].pose")), message)
                }
                other => other,
            })?;
        }
        if !entry.stable_poses.is_empty() && (total - 1.0).abs() > 1e-6 {
            return Err(Error::schema(
                at("stable_poses"),
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
    }
    Ok(doc)
}

impl LibraryDocument {
    pub fn from_library(lib: &ObjectLibrary, yaml_dir: &Path) -> Result<LibraryDocument> {
        let base = absolute(yaml_dir);
        let mut objects = BTreeMap::new();
        for (id, obj) in &lib.objects {
            if !obj.mesh_path.exists() {
                return Err(Error::MissingMeshFile {
                    object: id.clone(),
                    path: obj.mesh_path.clone(),
                });
            }
            let mesh_abs = absolute(&obj.mesh_path);
            let rel = pathdiff::diff_paths(&mesh_abs, &base).unwrap_or(mesh_abs);
            objects.insert(
                id.clone(),
                ObjectEntry {
                    mesh: rel.to_string_lossy().replace('\\', "/"),
                    mass: sig9(obj.mass),
                    friction: sig9(obj.friction),
                    scale: sig9(obj.scale),
                    stable_poses: obj
                        .stable_poses
                        .iter()
                        .map(|p| PoseEntry {
                            probability: sig9(p.probability),
                            pose: pose_text(p),
                        })
                        .collect(),
                },
            );
        }
        Ok(LibraryDocument {
            version: LIBRARY_VERSION,
            name: lib.name.clone(),
            objects,
        })
    }

    /// Loads every referenced mesh (relative to `base_dir`) and rebuilds the
    /// library. Stable poses are taken from the document and re-validated.
    pub fn into_library(self, base_dir: &Path) -> Result<ObjectLibrary> {
        let mut lib = ObjectLibrary::new(self.name);
        for (id, entry) in self.objects {
            let path = base_dir.join(&entry.mesh);
            if !path.exists() {
                return Err(Error::MissingMeshFile { object: id, path });
            }
            let mesh = load_mesh(&path, entry.scale)?;
            let mass_properties = mass_properties(&mesh, entry.mass)?;
            let mut object = ObjectType {
                identifier: id.clone(),
                mesh_path: path,
                mesh: Arc::new(mesh),
                mass: entry.mass,
                friction: entry.friction,
                scale: entry.scale,
                stable_poses: Vec::new(),
                mass_properties,
            };
            let mut poses = Vec::with_capacity(entry.stable_poses.len());
            for p in &entry.stable_poses {
                let pose = Pose::from_row_major(&p.pose)?;
                let support_area = support_polygon(&object.mesh, &pose).map_or(0.0, |poly| polygon_area(&poly).abs());
                poses.push(StablePose {
                    pose,
                    probability: p.probability,
                    support_area,
                    validated: validate_stable_pose(&object, &pose),
                    source: Some(p.pose.clone()),
                });
            }
            object.stable_poses = poses;
            lib.objects.insert(id, object);
        }
        Ok(lib)
    }
}

fn pose_text(p: &StablePose) -> Vec<f64> {
    match &p.source {
        Some(m) if Pose::from_row_major(m).is_ok_and(|q| q.max_abs_diff(&p.pose) < 1e-8) => m.clone(),
        _ => pose_to_floats(&p.pose),
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

pub fn save_library(lib: &ObjectLibrary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let doc = LibraryDocument::from_library(lib, dir)?;
    std::fs::write(path, to_yaml(&doc)).map_err(|e| Error::io(path, e))
}

pub fn load_library(path: impl AsRef<Path>) -> Result<ObjectLibrary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc = parse_library_yaml(&text)?;
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    doc.into_library(dir)
}
