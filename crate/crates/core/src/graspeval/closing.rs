use nalgebra::{Point3, Vector3};

use super::ContactPoint;
use crate::geom::{PosedMesh, Pose};
use crate::graspgen::ParallelJawGripper;

/// Pad compliance: rays hitting within this distance (metres) of a pad's
/// first contact touch too.
pub const PAD_COMPLIANCE: f64 = 0.002;

/// Samples per pad edge; the four corners of the grid are the patch points.
const GRID: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosingFailure {
    NoContact,
    ObstacleContact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Surface {
    Object(usize),
    Ground,
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    distance: f64,
    point: Point3<f64>,
    /// Outward surface normal.
    normal: Vector3<f64>,
    surface: Surface,
}

fn cast(origin: &Point3<f64>, dir: &Vector3<f64>, travel: f64, posed: &[PosedMesh]) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, mesh) in posed.iter().enumerate() {
        let limit = best.map_or(travel, |h| h.distance);
        if let Some(h) = mesh.bvh.raycast(origin, dir, 0.0, limit) {
            if best.is_none_or(|b| h.distance < b.distance) {
                best = Some(Hit { distance: h.distance, point: h.point, normal: h.normal, surface: Surface::Object(i) });
            }
        }
    }
    let ground_t = if origin.z <= 0.0 {
        Some(0.0)
    } else if dir.z < 0.0 {
        Some(-origin.z / dir.z)
    } else {
        None
    };
    if let Some(t) = ground_t.filter(|&t| t <= travel) {
        if best.is_none_or(|b| t < b.distance) {
            best = Some(Hit { distance: t, point: origin + dir * t, normal: Vector3::z(), surface: Surface::Ground });
        }
    }
    best
}

/// Closes both pads of `gripper` from its maximum opening along the grasp
/// frame's x axis (`grasp_pose` in the scene frame) and returns the contact
/// patches on instance `target` with friction `friction`.
pub fn close_fingers(
    posed: &[PosedMesh],
    target: usize,
    grasp_pose: &Pose,
    gripper: &ParallelJawGripper,
    friction: f64,
) -> Result<Vec<ContactPoint>, ClosingFailure> {
    let travel = gripper.max_opening / 2.0;
    let mut contacts = Vec::new();
    let mut missing = false;
    for side in 0..2 {
        let (centre, hy, hz) = gripper.pad_face(gripper.max_opening, side);
        let inward = if side == 0 { Vector3::x() } else { -Vector3::x() };
        let dir = grasp_pose.transform_vector(&inward);
        let mut hits = Vec::with_capacity(GRID * GRID);
        for iy in 0..GRID {
            for iz in 0..GRID {
                let local = centre + Vector3::new(0.0, grid_coord(iy, hy), grid_coord(iz, hz));
                let origin = grasp_pose.transform_point(&Point3::from(local));
                let corner = (iy == 0 || iy == GRID - 1) && (iz == 0 || iz == GRID - 1);
                hits.push((corner, cast(&origin, &dir, travel, posed)));
            }
        }
        let Some(first) = hits.iter().filter_map(|h| h.1).map(|h| h.distance).reduce(f64::min) else {
            missing = true;
            continue;
        };
        let touching: Vec<(bool, Hit)> = hits
            .iter()
            .filter_map(|&(corner, h)| h.filter(|h| h.distance <= first + PAD_COMPLIANCE).map(|h| (corner, h)))
            .collect();
        if touching.iter().any(|(_, h)| h.surface != Surface::Object(target)) {
            return Err(ClosingFailure::ObstacleContact);
        }
        let to_contact = |h: &Hit| ContactPoint::new(h.point, -h.normal, friction, side as u8);
        let corners: Vec<ContactPoint> = touching.iter().filter(|(c, _)| *c).map(|(_, h)| to_contact(h)).collect();
        if corners.is_empty() {
            let nearest = touching.iter().min_by(|a, b| a.1.distance.total_cmp(&b.1.distance)).unwrap();
            contacts.push(to_contact(&nearest.1));
        } else {
            contacts.extend(corners);
        }
    }
    if missing {
        return Err(ClosingFailure::NoContact);
    }
    Ok(contacts)
}

fn grid_coord(i: usize, half: f64) -> f64 {
    -half + 2.0 * half * i as f64 / (GRID - 1) as f64
}
