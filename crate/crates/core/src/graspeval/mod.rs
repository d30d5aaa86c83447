//! Quasi-static grasp trials: pre-grasp collision gates, finger closing to
//! contact, and the lift replaced by static resistance of the scaled
//! gravity wrench.

mod closing;
mod records;
mod wrench;

pub use closing::{close_fingers, ClosingFailure, PAD_COMPLIANCE};
pub use records::{
    load_records, parse_records_csv, parse_records_yaml, records_to_csv, records_to_yaml, save_records,
    select_balanced, TrialRecord, TrialRecordsDocument, TRIAL_RECORDS_VERSION,
};
pub use wrench::{can_resist_wrench, cone_edges, force_closure_epsilon, primitive_wrenches, torque_scale};

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PosedMesh, Pose};
use crate::graspgen::{Grasp, GraspSet, ParallelJawGripper};
use crate::objectlib::ObjectLibrary;
use crate::scene::Scene;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    pub position: Point3<f64>,
    /// Inward unit normal.
    pub normal: Vector3<f64>,
    pub friction: f64,
    /// 0 for the pad at -x of the grasp frame, 1 for +x.
    pub finger: u8,
}

impl ContactPoint {
    pub fn new(position: Point3<f64>, normal: Vector3<f64>, friction: f64, finger: u8) -> Self {
        ContactPoint { position, normal: normal.normalize(), friction, finger }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspLabel {
    Success,
    FailPregraspCollision,
    FailNoContact,
    FailObstacleContact,
    FailCannotHold,
}

impl GraspLabel {
    pub const ALL: [GraspLabel; 5] = [
        GraspLabel::Success,
        GraspLabel::FailPregraspCollision,
        GraspLabel::FailNoContact,
        GraspLabel::FailObstacleContact,
        GraspLabel::FailCannotHold,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GraspLabel::Success => "success",
            GraspLabel::FailPregraspCollision => "fail_pregrasp_collision",
            GraspLabel::FailNoContact => "fail_no_contact",
            GraspLabel::FailObstacleContact => "fail_obstacle_contact",
            GraspLabel::FailCannotHold => "fail_cannot_hold",
        }
    }
}

impl std::fmt::Display for GraspLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GraspLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        GraspLabel::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| format!("unknown outcome `{s}`"))
    }
}

/// Which pre-grasp check rejected a grasp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionGate {
    /// Open hand against the ground plane.
    Coarse,
    /// Open hand against the scene meshes.
    Fine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspOutcome {
    pub label: GraspLabel,
    pub epsilon_quality: f64,
    pub contacts: Vec<ContactPoint>,
    pub gate: Option<CollisionGate>,
}

impl GraspOutcome {
    fn failed(label: GraspLabel) -> Self {
        GraspOutcome { label, epsilon_quality: 0.0, contacts: Vec::new(), gate: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub cone_edges: usize,
    /// Newtons, summed over all contact normal forces.
    pub max_grip_force: f64,
    /// Multiplier on the gravity wrench standing in for the lift.
    pub lift_wrench_scale: f64,
    pub gravity: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { cone_edges: 8, max_grip_force: 40.0, lift_wrench_scale: 1.2, gravity: 9.81 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cone_edges < 3 {
            return Err(Error::invalid("cone_edges", "must be at least 3"));
        }
        if !(self.max_grip_force.is_finite() && self.max_grip_force > 0.0) {
            return Err(Error::invalid("max_grip_force", "must be positive"));
        }
        if !(self.lift_wrench_scale.is_finite() && self.lift_wrench_scale >= 0.0) {
            return Err(Error::invalid("lift_wrench_scale", "must be non-negative"));
        }
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return Err(Error::invalid("gravity", "must be non-negative"));
        }
        Ok(())
    }

    /// Stamp written into every trial record.
    pub fn describe(&self) -> String {
        format!(
            "static-lift scale={} g={} cone_edges={} max_grip_force={}N",
            self.lift_wrench_scale, self.gravity, self.cone_edges, self.max_grip_force
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Body {
    mass: f64,
    friction: f64,
    com: Point3<f64>,
}

/// Scene meshes placed once for many evaluations.
#[derive(Debug, Clone)]
pub struct SceneContext {
    posed: Vec<PosedMesh>,
    bodies: Vec<Body>,
    poses: Vec<Pose>,
}

impl SceneContext {
    pub fn new(scene: &Scene, library: &ObjectLibrary) -> Result<SceneContext> {
        let posed = scene.posed_meshes(library)?;
        let mut bodies = Vec::with_capacity(scene.instances.len());
        for inst in &scene.instances {
            let obj = library.get(&inst.object_id)?;
            bodies.push(Body { mass: obj.mass, friction: obj.friction, com: inst.pose.transform_point(&obj.com()) });
        }
        let poses = scene.instances.iter().map(|i| i.pose).collect();
        Ok(SceneContext { posed, bodies, poses })
    }

    pub fn posed(&self) -> &[PosedMesh] {
        &self.posed
    }

    pub fn instance_pose(&self, index: usize) -> Result<&Pose> {
        self.poses.get(index).ok_or(Error::UnknownInstance(index))
    }

    /// Trial of a grasp whose pose is given in the scene frame.
    pub fn evaluate(&self, target: usize, grasp_pose: &Pose, gripper: &ParallelJawGripper, config: &EvalConfig) -> Result<GraspOutcome> {
        let body = *self.bodies.get(target).ok_or(Error::UnknownInstance(target))?;

        let open = gripper.boxes(gripper.max_opening, 0.0).transformed(grasp_pose);
        if open.touches_ground() {
            return Ok(GraspOutcome { gate: Some(CollisionGate::Coarse), ..GraspOutcome::failed(GraspLabel::FailPregraspCollision) });
        }
        if self.posed.iter().any(|m| open.collides(m)) {
            return Ok(GraspOutcome { gate: Some(CollisionGate::Fine), ..GraspOutcome::failed(GraspLabel::FailPregraspCollision) });
        }

        let contacts = match close_fingers(&self.posed, target, grasp_pose, gripper, body.friction) {
            Ok(c) => c,
            Err(ClosingFailure::NoContact) => return Ok(GraspOutcome::failed(GraspLabel::FailNoContact)),
            Err(ClosingFailure::ObstacleContact) => return Ok(GraspOutcome::failed(GraspLabel::FailObstacleContact)),
        };
        if !(contacts.iter().any(|c| c.finger == 0) && contacts.iter().any(|c| c.finger == 1)) {
            return Ok(GraspOutcome { contacts, ..GraspOutcome::failed(GraspLabel::FailNoContact) });
        }

        let weight = body.mass * config.gravity * config.lift_wrench_scale;
        let wrench = [0.0, 0.0, -weight, 0.0, 0.0, 0.0];
        let epsilon_quality = force_closure_epsilon(&contacts, &body.com, config);
        let holds = can_resist_wrench(&contacts, &body.com, &wrench, config);
        let label = if holds && epsilon_quality > 0.0 { GraspLabel::Success } else { GraspLabel::FailCannotHold };
        Ok(GraspOutcome { label, epsilon_quality, contacts, gate: None })
    }
}

/// Trial of `grasp` (scene frame) on instance `target`.
pub fn evaluate_grasp(
    scene: &Scene,
    library: &ObjectLibrary,
    target: usize,
    grasp: &Grasp,
    gripper: &ParallelJawGripper,
    config: &EvalConfig,
) -> Result<GraspOutcome> {
    scene.instance(target)?;
    config.validate()?;
    gripper.validate()?;
    SceneContext::new(scene, library)?.evaluate(target, &grasp.pose, gripper, config)
}

/// Grasps of one instance, in that object's frame.
#[derive(Debug, Clone)]
pub struct InstanceGrasps {
    pub instance: usize,
    pub set: GraspSet,
}

/// Outcomes of every grasp, in input order.
pub fn evaluate_outcomes(
    scene: &Scene,
    library: &ObjectLibrary,
    batches: &[InstanceGrasps],
    gripper: &ParallelJawGripper,
    config: &EvalConfig,
) -> Result<Vec<GraspOutcome>> {
    config.validate()?;
    gripper.validate()?;
    let ctx = SceneContext::new(scene, library)?;
    let jobs: Vec<(usize, Pose)> = batches
        .iter()
        .map(|b| Ok((b.instance, *ctx.instance_pose(b.instance)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .zip(batches)
        .flat_map(|((inst, pose), b)| b.set.grasps.iter().map(move |g| (inst, pose.compose(&g.pose))))
        .collect();
    jobs.par_iter().map(|(inst, pose)| ctx.evaluate(*inst, pose, gripper, config)).collect()
}

/// One record per grasp, in input order; `grasp_id` is the index within its set.
pub fn evaluate_batch(
    scene_id: &str,
    scene: &Scene,
    library: &ObjectLibrary,
    batches: &[InstanceGrasps],
    gripper: &ParallelJawGripper,
    config: &EvalConfig,
) -> Result<Vec<TrialRecord>> {
    let outcomes = evaluate_outcomes(scene, library, batches, gripper, config)?;
    let evaluator = config.describe();
    let keys = batches.iter().flat_map(|b| {
        let object_id = scene.instances[b.instance].object_id.clone();
        (0..b.set.len()).map(move |i| (object_id.clone(), i))
    });
    Ok(keys
        .zip(outcomes)
        .map(|((object_id, grasp_id), o)| TrialRecord {
            scene_id: scene_id.to_string(),
            object_id,
            grasp_id,
            sim_label: o.label == GraspLabel::Success,
            real_label: None,
            fail_reason: (o.label != GraspLabel::Success).then_some(o.label),
            epsilon: o.epsilon_quality,
            evaluator: evaluator.clone(),
        })
        .collect())
}

/// Per-label tallies with the two pre-grasp gates apart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub success: usize,
    pub pregrasp_coarse: usize,
    pub pregrasp_fine: usize,
    pub no_contact: usize,
    pub obstacle_contact: usize,
    pub cannot_hold: usize,
}

impl OutcomeCounts {
    pub fn from_outcomes<'a>(outcomes: impl IntoIterator<Item = &'a GraspOutcome>) -> Self {
        let mut c = OutcomeCounts::default();
        for o in outcomes {
            match (o.label, o.gate) {
                (GraspLabel::Success, _) => c.success += 1,
                (GraspLabel::FailPregraspCollision, Some(CollisionGate::Coarse)) => c.pregrasp_coarse += 1,
                (GraspLabel::FailPregraspCollision, _) => c.pregrasp_fine += 1,
                (GraspLabel::FailNoContact, _) => c.no_contact += 1,
                (GraspLabel::FailObstacleContact, _) => c.obstacle_contact += 1,
                (GraspLabel::FailCannotHold, _) => c.cannot_hold += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.success + self.pregrasp_coarse + self.pregrasp_fine + self.no_contact + self.obstacle_contact + self.cannot_hold
    }
}
