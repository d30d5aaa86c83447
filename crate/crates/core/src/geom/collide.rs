//! Triangle-level intersection queries with the toolkit's contact tolerance.

use nalgebra::{Point3, Vector3};

use super::bvh::{intersect_triangle, Bvh};
use super::mesh::{Aabb, TriMesh};
use super::pose::Pose;
use super::sample::point_triangle_distance;

/// Triangle pairs closer than this (metres) count as intersecting, so
/// touching surfaces collide.
pub const CONTACT_TOLERANCE: f64 = 1e-6;

/// A mesh transformed into the scene frame with its BVH.
#[derive(Debug, Clone)]
pub struct PosedMesh {
    pub mesh: TriMesh,
    pub bvh: Bvh,
    pub aabb: Aabb,
}

impl PosedMesh {
    pub fn new(mesh: &TriMesh, pose: &Pose) -> PosedMesh {
        let mesh = mesh.transformed(pose);
        let bvh = Bvh::new(&mesh);
        let aabb = mesh.aabb();
        PosedMesh { mesh, bvh, aabb }
    }

    /// Surface intersection (within [`CONTACT_TOLERANCE`]) or full containment
    /// of either mesh inside the other.
    pub fn collides(&self, other: &PosedMesh) -> bool {
        if !self.aabb.inflated(CONTACT_TOLERANCE).overlaps(&other.aabb) {
            return false;
        }
        surfaces_intersect(self, other)
            || self.mesh.vertices().first().is_some_and(|v| other.bvh.contains_point(v))
            || other.mesh.vertices().first().is_some_and(|v| self.bvh.contains_point(v))
    }

    pub fn min_z(&self) -> f64 {
        self.aabb.min.z
    }
}

/// True iff some triangle of posed `a` is within [`CONTACT_TOLERANCE`] of some
/// triangle of posed `b`. Containment without surface contact is not reported.
pub fn meshes_intersect(mesh_a: &TriMesh, pose_a: &Pose, mesh_b: &TriMesh, pose_b: &Pose) -> bool {
    let a = PosedMesh::new(mesh_a, pose_a);
    let b = PosedMesh::new(mesh_b, pose_b);
    surfaces_intersect(&a, &b)
}

pub(crate) fn surfaces_intersect(a: &PosedMesh, b: &PosedMesh) -> bool {
    if !a.aabb.inflated(CONTACT_TOLERANCE).overlaps(&b.aabb) {
        return false;
    }
    // iterate the smaller mesh against the larger one's BVH
    let (small, large) = if a.mesh.triangles().len() <= b.mesh.triangles().len() {
        (a, b)
    } else {
        (b, a)
    };
    for i in 0..small.mesh.triangles().len() {
        let ta = small.mesh.triangle(i);
        let query = Aabb::from_points(ta.iter()).inflated(CONTACT_TOLERANCE);
        let mut hit = false;
        large.bvh.for_each_overlapping(&query, |j| {
            hit = triangles_within(&ta, large.bvh.triangle(j), CONTACT_TOLERANCE);
            hit
        });
        if hit {
            return true;
        }
    }
    false
}

/// Symmetric triangle proximity test: crossing, or separation `<= tol`.
pub fn triangles_within(a: &[Point3<f64>; 3], b: &[Point3<f64>; 3], tol: f64) -> bool {
    edges_cross(a, b) || edges_cross(b, a) || triangle_distance(a, b).min(triangle_distance(b, a)) <= tol
}

fn edges_cross(a: &[Point3<f64>; 3], b: &[Point3<f64>; 3]) -> bool {
    (0..3).any(|k| {
        let p = a[k];
        let d = a[(k + 1) % 3] - p;
        intersect_triangle(&p, &d, b).is_some_and(|t| (0.0..=1.0).contains(&t))
    })
}

/// Separation of non-crossing triangles: vertex-face and edge-edge minima.
fn triangle_distance(a: &[Point3<f64>; 3], b: &[Point3<f64>; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        best = best.min(point_triangle_distance(p, b));
    }
    for i in 0..3 {
        for j in 0..3 {
            best = best.min(segment_distance(&a[i], &a[(i + 1) % 3], &b[j], &b[(j + 1) % 3]));
        }
    }
    best
}

/// Closest distance between segments `p1q1` and `p2q2`.
pub fn segment_distance(p1: &Point3<f64>, q1: &Point3<f64>, p2: &Point3<f64>, q2: &Point3<f64>) -> f64 {
    let d1: Vector3<f64> = q1 - p1;
    let d2: Vector3<f64> = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return r.norm();
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}
