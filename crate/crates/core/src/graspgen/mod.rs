//! Antipodal grasp sampling for parallel-jaw grippers.

mod gripper;
mod yaml;

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{any_perpendicular, sample_surface, PosedMesh, Pose};
use crate::objectlib::{ObjectLibrary, ObjectType};
use crate::rng::{derive_seed, seeded};
use crate::scene::Scene;

pub use gripper::{GripperBoxes, ParallelJawGripper, PAD_CLEARANCE};
pub use yaml::{load_grasp_set, parse_grasp_set_yaml, save_grasp_set, GraspEntry, GraspSetDocument, GRASP_SET_VERSION};

/// Second-contact rays ignore hits closer than this (metres) to the first contact.
pub const MIN_RAY_DISTANCE: f64 = 1e-3;
/// Contact pairs closer than this (metres) are discarded.
pub const MIN_CONTACT_SEPARATION: f64 = 1e-3;
/// Slack on the friction-cone angle comparison (radians), for round-off only.
pub const ANGLE_TOLERANCE: f64 = 1e-12;

/// Surface contact with its inward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point: Point3<f64>,
    pub normal: Vector3<f64>,
}

impl Contact {
    pub fn transformed(&self, pose: &Pose) -> Contact {
        Contact {
            point: pose.transform_point(&self.point),
            normal: pose.transform_vector(&self.normal),
        }
    }
}

/// Two-finger grasp. `contacts[0]` touches the pad at -x, `contacts[1]` the
/// pad at +x of the grasp frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grasp {
    pub pose: Pose,
    pub width: f64,
    pub contacts: [Contact; 2],
}

impl Grasp {
    /// Grasp frame centred between the contacts with x from `c1` to `c2`;
    /// the approach axis is turned by `angle` about x.
    pub fn from_contacts(c1: Contact, c2: Contact, angle: f64) -> Grasp {
        let d = c2.point - c1.point;
        let width = d.norm();
        let x = d / width;
        let z0 = any_perpendicular(&x).normalize();
        let w = x.cross(&z0);
        let z = z0 * angle.cos() + w * angle.sin();
        let y = z.cross(&x);
        let r = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
        let centre = nalgebra::center(&c1.point, &c2.point);
        Grasp {
            pose: Pose::new(UnitQuaternion::from_rotation_matrix(&r), centre.coords),
            width,
            contacts: [c1, c2],
        }
    }

    pub fn transformed(&self, pose: &Pose) -> Grasp {
        Grasp {
            pose: pose.compose(&self.pose),
            width: self.width,
            contacts: self.contacts.map(|c| c.transformed(pose)),
        }
    }

    pub fn closing_axis(&self) -> Vector3<f64> {
        self.pose.transform_vector(&Vector3::x())
    }

    pub fn approach_axis(&self) -> Vector3<f64> {
        self.pose.transform_vector(&Vector3::z())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingParams {
    pub n_surface_samples: usize,
    pub rays_per_cone: usize,
    pub n_approach_angles: usize,
    pub seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            n_surface_samples: 1000,
            rays_per_cone: 4,
            n_approach_angles: 8,
            seed: 0,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_surface_samples", self.n_surface_samples),
            ("rays_per_cone", self.rays_per_cone),
            ("n_approach_angles", self.n_approach_angles),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Grasps on one object, in the object's mesh frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspSet {
    pub object_id: String,
    /// Friction coefficient used by the antipodal filter.
    pub friction: f64,
    pub params: SamplingParams,
    pub grasps: Vec<Grasp>,
}

impl GraspSet {
    pub fn len(&self) -> usize {
        self.grasps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grasps.is_empty()
    }

    /// `count` grasps drawn without replacement, kept in their original order.
    pub fn subsample(&self, count: usize, seed: u64) -> GraspSet {
        let mut out = self.clone();
        if count < self.grasps.len() {
            let mut idx = rand::seq::index::sample(&mut seeded(seed), self.grasps.len(), count).into_vec();
            idx.sort_unstable();
            out.grasps = idx.into_iter().map(|i| self.grasps[i]).collect();
        }
        out
    }
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Each inward normal lies within the friction cone (half-angle `atan(mu)`)
/// around the line joining the contacts.
pub fn check_antipodal(c1: &Contact, c2: &Contact, mu: f64) -> bool {
    let d = c2.point - c1.point;
    let len = d.norm();
    if !(len > 0.0 && mu >= 0.0) {
        return false;
    }
    let d = d / len;
    let half = mu.atan() + ANGLE_TOLERANCE;
    angle_between(&c1.normal, &d) <= half && angle_between(&c2.normal, &-d) <= half
}

/// Direction uniform over the spherical cap of half-angle `half` around `axis`.
fn cone_direction(axis: &Vector3<f64>, half: f64, rng: &mut impl Rng) -> Vector3<f64> {
    let u = any_perpendicular(axis).normalize();
    let v = axis.cross(&u);
    let cos_t = 1.0 - rng.random::<f64>() * (1.0 - half.cos());
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = TAU * rng.random::<f64>();
    (axis * cos_t + (u * phi.cos() + v * phi.sin()) * sin_t).normalize()
}

/// Samples first contacts on the surface, casts `rays_per_cone` rays inside
/// each friction cone for the second contact, keeps antipodal pairs that fit
/// the gripper and emits `n_approach_angles` grasps per pair, dropping those
/// where the hand model hits the object.
pub fn sample_antipodal_grasps(
    object: &ObjectType,
    gripper: &ParallelJawGripper,
    params: &SamplingParams,
) -> Result<GraspSet> {
    object.mesh.check_watertight()?;
    gripper.validate()?;
    params.validate()?;
    let posed = PosedMesh::new(&object.mesh, &Pose::identity());
    let samples = sample_surface(&object.mesh, params.n_surface_samples, params.seed)?;
    let mu = object.friction;
    let half = mu.atan();
    let per_sample: Vec<Vec<Grasp>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = seeded(derive_seed(params.seed, i as u64));
            let c1 = Contact { point: s.point, normal: -s.normal };
            let mut out = Vec::new();
            for _ in 0..params.rays_per_cone {
                let dir = cone_direction(&c1.normal, half, &mut rng);
                let hits = posed.bvh.raycast_all(&c1.point, &dir, MIN_RAY_DISTANCE, f64::INFINITY);
                let Some(far) = hits.last() else { continue };
                let c2 = Contact { point: far.point, normal: -far.normal };
                let width = (c2.point - c1.point).norm();
                if !(MIN_CONTACT_SEPARATION..=gripper.max_opening).contains(&width) || !check_antipodal(&c1, &c2, mu) {
                    continue;
                }
                for j in 0..params.n_approach_angles {
                    let g = Grasp::from_contacts(c1, c2, TAU * j as f64 / params.n_approach_angles as f64);
                    let hand = gripper.boxes(g.width, PAD_CLEARANCE).transformed(&g.pose);
                    if !hand.collides(&posed) {
                        out.push(g);
                    }
                }
            }
            out
        })
        .collect();
    Ok(GraspSet {
        object_id: object.identifier.clone(),
        friction: mu,
        params: *params,
        grasps: per_sample.into_iter().flatten().collect(),
    })
}

/// Whether the hand at `grasp` (scene frame, fingers at the grasp width)
/// hits the ground, any non-target mesh, or the target beyond the pads'
/// inner contact layer.
pub fn gripper_blocked(gripper: &ParallelJawGripper, grasp: &Grasp, posed: &[PosedMesh], target: usize) -> bool {
    let full = gripper.boxes(grasp.width, 0.0).transformed(&grasp.pose);
    if full.touches_ground() {
        return true;
    }
    let cleared = gripper.boxes(grasp.width, PAD_CLEARANCE).transformed(&grasp.pose);
    posed.iter().enumerate().any(|(i, mesh)| {
        if i == target {
            cleared.collides(mesh)
        } else {
            full.collides(mesh)
        }
    })
}

/// Keeps the grasps of `set` (object frame) whose hand model, placed on
/// instance `target`, is free of the ground and the other scene objects.
pub fn filter_gripper_collisions(
    set: &GraspSet,
    scene: &Scene,
    library: &ObjectLibrary,
    target: usize,
    gripper: &ParallelJawGripper,
) -> Result<GraspSet> {
    let inst = scene.instance(target)?;
    let posed = scene.posed_meshes(library)?;
    Ok(filter_posed(set, &posed, target, &inst.pose, gripper))
}

/// As [`filter_gripper_collisions`] over meshes already placed in the scene.
pub fn filter_posed(
    set: &GraspSet,
    posed: &[PosedMesh],
    target: usize,
    instance_pose: &Pose,
    gripper: &ParallelJawGripper,
) -> GraspSet {
    let keep: Vec<bool> = set
        .grasps
        .par_iter()
        .map(|g| !gripper_blocked(gripper, &g.transformed(instance_pose), posed, target))
        .collect();
    let mut out = set.clone();
    out.grasps = set.grasps.iter().zip(keep).filter(|(_, k)| *k).map(|(g, _)| *g).collect();
    out
}
