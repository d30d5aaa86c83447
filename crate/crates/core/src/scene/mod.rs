//! Scenes: posed object instances on a rectangular ground area.
//!
//! Scene frame: origin at one corner of the ground area, x along the width,
//! y along the depth, z up.

mod random;
mod yaml;

use std::path::PathBuf;

use nalgebra::{UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PosedMesh, Pose};
use crate::objectlib::{ObjectLibrary, REST_TOLERANCE};
use crate::printout::MarkerBoardSpec;

pub use random::{random_scene, RandomSceneParams};
pub use yaml::{load_scene, parse_scene_json, parse_scene_yaml, save_scene, InstanceEntry, SceneDocument, SCENE_VERSION};

/// Vertices may sink this far below z = 0 before the instance collides with the ground.
pub const GROUND_TOLERANCE: f64 = REST_TOLERANCE;
/// Slack on the ground-area bounds for round-off in placed vertices.
pub const BOUNDS_TOLERANCE: f64 = 1e-9;

/// ISO sheet sizes in metres, landscape.
pub const GROUND_PRESETS: [(&str, [f64; 2]); 3] =
    [("A2", [0.594, 0.420]), ("A3", [0.420, 0.297]), ("A4", [0.297, 0.210])];

pub fn ground_preset(name: &str) -> Option<[f64; 2]> {
    GROUND_PRESETS
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|&(_, a)| a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    pub object_id: String,
    pub pose: Pose,
}

impl ObjectInstance {
    pub fn new(object_id: impl Into<String>, pose: Pose) -> Self {
        ObjectInstance { object_id: object_id.into(), pose }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Width (x) and depth (y) in metres.
    pub ground_area: [f64; 2],
    pub instances: Vec<ObjectInstance>,
    pub library_ref: PathBuf,
    pub board: Option<MarkerBoardSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InstanceStatus {
    Ok,
    Collision,
    OutOfBounds,
}

impl Scene {
    pub fn new(ground_area: [f64; 2], library_ref: impl Into<PathBuf>) -> Result<Scene> {
        check_ground_area(ground_area)?;
        Ok(Scene {
            ground_area,
            instances: Vec::new(),
            library_ref: library_ref.into(),
            board: None,
        })
    }

    pub fn instance(&self, index: usize) -> Result<&ObjectInstance> {
        self.instances.get(index).ok_or(Error::UnknownInstance(index))
    }

    /// Every instance mesh transformed into the scene frame, in instance order.
    pub fn posed_meshes(&self, library: &ObjectLibrary) -> Result<Vec<PosedMesh>> {
        let objects = self
            .instances
            .iter()
            .map(|inst| library.get(&inst.object_id))
            .collect::<Result<Vec<_>>>()?;
        Ok(objects
            .par_iter()
            .zip(self.instances.par_iter())
            .map(|(obj, inst)| PosedMesh::new(&obj.mesh, &inst.pose))
            .collect())
    }
}

pub(crate) fn check_ground_area(area: [f64; 2]) -> Result<()> {
    if area.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(Error::invalid("ground_area", format!("width and depth must be positive, got {area:?}")))
    }
}

pub(crate) fn below_ground(posed: &PosedMesh) -> bool {
    posed.min_z() < -GROUND_TOLERANCE
}

pub(crate) fn out_of_bounds(posed: &PosedMesh, area: [f64; 2]) -> bool {
    let b = &posed.aabb;
    let (lo, hi) = (-BOUNDS_TOLERANCE, BOUNDS_TOLERANCE);
    b.min.x < lo || b.min.y < lo || b.max.x > area[0] + hi || b.max.y > area[1] + hi
}

/// Status per instance over already posed meshes. Collision covers contact
/// with another instance or sinking below the ground and dominates OutOfBounds.
pub fn statuses(posed: &[PosedMesh], ground_area: [f64; 2]) -> Vec<InstanceStatus> {
    let n = posed.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let hits: Vec<(usize, usize)> = pairs
        .into_par_iter()
        .filter(|&(i, j)| posed[i].collides(&posed[j]))
        .collect();
    let mut colliding: Vec<bool> = posed.iter().map(below_ground).collect();
    for (i, j) in hits {
        colliding[i] = true;
        colliding[j] = true;
    }
    posed
        .iter()
        .zip(colliding)
        .map(|(p, c)| {
            if c {
                InstanceStatus::Collision
            } else if out_of_bounds(p, ground_area) {
                InstanceStatus::OutOfBounds
            } else {
                InstanceStatus::Ok
            }
        })
        .collect()
}

/// Collision and out-of-bounds status of every instance, in instance order.
pub fn validate_scene(scene: &Scene, library: &ObjectLibrary) -> Result<Vec<InstanceStatus>> {
    check_ground_area(scene.ground_area)?;
    let posed = scene.posed_meshes(library)?;
    Ok(statuses(&posed, scene.ground_area))
}

/// Replaces instance `index`'s orientation by stable pose `pose_index`,
/// keeping its yaw relative to that stable pose and its xy translation, and
/// lowers it onto the ground.
pub fn snap_to_stable(scene: &Scene, index: usize, library: &ObjectLibrary, pose_index: usize) -> Result<Scene> {
    let len = scene.instances.len();
    let inst = scene
        .instances
        .get(index)
        .ok_or(Error::IndexOutOfRange { what: "instance", index, len })?;
    let object = library.get(&inst.object_id)?;
    let stable = object.stable_poses.get(pose_index).ok_or(Error::IndexOutOfRange {
        what: "stable pose",
        index: pose_index,
        len: object.stable_poses.len(),
    })?;
    let stable_rot = stable.pose.rotation();
    let relative = Pose::from_rotation(inst.pose.rotation() * stable_rot.inverse());
    let yaw = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), relative.yaw_angle());
    let rotation = yaw * stable_rot;
    let t = inst.pose.translation();
    let oriented = Pose::new(rotation, Vector3::new(t.x, t.y, 0.0));
    let min_z = object
        .mesh
        .vertices()
        .iter()
        .map(|v| oriented.transform_point(v).z)
        .fold(f64::INFINITY, f64::min);
    let mut out = scene.clone();
    out.instances[index].pose = Pose::new(rotation, Vector3::new(t.x, t.y, -min_z));
    Ok(out)
}
