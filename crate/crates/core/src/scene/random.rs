use std::f64::consts::TAU;
use std::path::PathBuf;

use nalgebra::Vector3;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{below_ground, check_ground_area, out_of_bounds, ObjectInstance, Scene};
use crate::error::{Error, Result};
use crate::geom::{PosedMesh, Pose};
use crate::objectlib::ObjectLibrary;
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSceneParams {
    /// Objects to attempt.
    pub n: usize,
    /// Placement attempts per object before it is skipped.
    pub k: usize,
    pub seed: u64,
}

impl Default for RandomSceneParams {
    fn default() -> Self {
        RandomSceneParams { n: 5, k: 20, seed: 0 }
    }
}

/// Draws `n` objects uniformly from the library, each in a stable pose drawn
/// by probability, and tries `k` random yaw/xy placements for each. Objects
/// with no collision-free in-bounds placement are skipped.
pub fn random_scene(
    library: &ObjectLibrary,
    params: &RandomSceneParams,
    ground_area: [f64; 2],
    library_ref: impl Into<PathBuf>,
) -> Result<Scene> {
    check_ground_area(ground_area)?;
    if params.k == 0 {
        return Err(Error::invalid("k", "at least one placement attempt is required"));
    }
    let mut scene = Scene::new(ground_area, library_ref)?;
    let ids: Vec<&str> = library.ids().collect();
    if ids.is_empty() {
        return Ok(scene);
    }
    let mut rng = seeded(params.seed);
    let mut placed: Vec<PosedMesh> = Vec::new();
    for _ in 0..params.n {
        let id = ids[rng.random_range(0..ids.len())];
        let object = library.get(id)?;
        let weights: Vec<f64> = object.stable_poses.iter().map(|p| p.probability).collect();
        let Ok(dist) = WeightedIndex::new(&weights) else {
            log::warn!("object `{id}` has no stable poses; skipped");
            continue;
        };
        let stable = object.stable_poses[dist.sample(&mut rng)].pose;
        for _ in 0..params.k {
            let turned = Pose::yaw(rng.random_range(0.0..TAU)).compose(&stable);
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for v in object.mesh.vertices() {
                let p = turned.transform_point(v);
                lo = [lo[0].min(p.x), lo[1].min(p.y)];
                hi = [hi[0].max(p.x), hi[1].max(p.y)];
            }
            let range = |a: usize| (-lo[a], ground_area[a] - hi[a]);
            let ((x0, x1), (y0, y1)) = (range(0), range(1));
            if x0 > x1 || y0 > y1 {
                continue;
            }
            let tx = x0 + (x1 - x0) * rng.random::<f64>();
            let ty = y0 + (y1 - y0) * rng.random::<f64>();
            let pose = Pose::from_translation(Vector3::new(tx, ty, 0.0)).compose(&turned);
            let candidate = PosedMesh::new(&object.mesh, &pose);
            if below_ground(&candidate)
                || out_of_bounds(&candidate, ground_area)
                || placed.iter().any(|p| p.collides(&candidate))
            {
                continue;
            }
            placed.push(candidate);
            scene.instances.push(ObjectInstance::new(id, pose));
            break;
        }
    }
    Ok(scene)
}
