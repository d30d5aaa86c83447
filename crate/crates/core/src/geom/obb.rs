use nalgebra::{Point3, Vector3};

use super::collide::{triangles_within, PosedMesh, CONTACT_TOLERANCE};
use super::mesh::Aabb;
use super::pose::Pose;

/// Oriented box: `half` extents along the axes of `pose`, centred at its origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub pose: Pose,
    pub half: Vector3<f64>,
}

const FACES: [[usize; 4]; 6] = [
    [0, 2, 3, 1],
    [4, 5, 7, 6],
    [0, 1, 5, 4],
    [2, 6, 7, 3],
    [0, 4, 6, 2],
    [1, 3, 7, 5],
];

impl Obb {
    pub fn new(pose: Pose, half: Vector3<f64>) -> Obb {
        Obb { pose, half }
    }

    /// Box spanning `[lo, hi]` in the frame `frame`.
    pub fn from_bounds(frame: &Pose, lo: Vector3<f64>, hi: Vector3<f64>) -> Obb {
        let centre = (lo + hi) / 2.0;
        Obb::new(frame.compose(&Pose::from_translation(centre)), (hi - lo) / 2.0)
    }

    pub fn transformed(&self, pose: &Pose) -> Obb {
        Obb::new(pose.compose(&self.pose), self.half)
    }

    /// Corner `i` has local sign `(+/-x, +/-y, +/-z)` from bits 0, 1, 2.
    pub fn corners(&self) -> [Point3<f64>; 8] {
        std::array::from_fn(|i| {
            let s = |bit: usize, h: f64| if i >> bit & 1 == 1 { h } else { -h };
            let local = Point3::new(s(0, self.half.x), s(1, self.half.y), s(2, self.half.z));
            self.pose.transform_point(&local)
        })
    }

    pub fn triangles(&self) -> [[Point3<f64>; 3]; 12] {
        let c = self.corners();
        std::array::from_fn(|k| {
            let f = FACES[k / 2];
            if k % 2 == 0 {
                [c[f[0]], c[f[1]], c[f[2]]]
            } else {
                [c[f[0]], c[f[2]], c[f[3]]]
            }
        })
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.corners().iter())
    }

    pub fn contains_point(&self, p: &Point3<f64>) -> bool {
        let local = self.pose.inverse().transform_point(p);
        local.x.abs() <= self.half.x && local.y.abs() <= self.half.y && local.z.abs() <= self.half.z
    }

    pub fn min_z(&self) -> f64 {
        self.corners().iter().map(|c| c.z).fold(f64::INFINITY, f64::min)
    }

    /// Surface contact within [`CONTACT_TOLERANCE`], or containment either way.
    pub fn collides(&self, mesh: &PosedMesh) -> bool {
        let bounds = self.aabb();
        if !bounds.inflated(CONTACT_TOLERANCE).overlaps(&mesh.aabb) {
            return false;
        }
        let tris = self.triangles();
        let mut hit = false;
        mesh.bvh.for_each_overlapping(&bounds.inflated(CONTACT_TOLERANCE), |j| {
            let t = mesh.bvh.triangle(j);
            hit = tris.iter().any(|b| triangles_within(b, t, CONTACT_TOLERANCE));
            hit
        });
        hit || mesh.mesh.vertices().first().is_some_and(|v| self.contains_point(v))
            || mesh.bvh.contains_point(&self.pose.transform_point(&Point3::origin()))
    }
}
