//! Meshes, poses, ray casting, collision, hulls and mass properties.

mod bvh;
mod collide;
mod io;
mod mass;
mod mesh;
mod obb;
mod pose;
mod sample;

pub use bvh::{intersect_triangle, Bvh, RayHit};
pub use collide::{meshes_intersect, segment_distance, triangles_within, PosedMesh, CONTACT_TOLERANCE};
pub use io::{load_mesh, parse_obj, parse_stl, write_obj, write_stl_binary, MeshFormat};
pub use mass::{mass_properties, MassProperties};
pub use mesh::{Aabb, TriMesh, WATERTIGHT_VOLUME_EPS};
pub use obb::Obb;
pub use pose::{any_perpendicular, rotation_between, Pose};
pub use sample::{closest_point_on_triangle, point_triangle_distance, sample_surface, SurfaceSample};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::hull::{quickhull, HullError};

/// Watertight, outward-oriented convex hull of `points`. Only hull vertices
/// are kept, in the order of their first appearance in `points`.
pub fn convex_hull(points: &[Point3<f64>]) -> Result<TriMesh> {
    let flat: Vec<f64> = points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    let hull = quickhull(&flat, 3).map_err(|e| match e {
        HullError::TooFewPoints => Error::DegenerateInput(format!("{} points, need at least 4", points.len())),
        HullError::Degenerate { rank } => {
            Error::DegenerateInput(format!("points span only {rank} dimension(s)"))
        }
    })?;
    let mut used: Vec<usize> = hull.facets.iter().flat_map(|f| f.vertices.iter().copied()).collect();
    used.sort_unstable();
    used.dedup();
    let remap: std::collections::HashMap<usize, u32> =
        used.iter().enumerate().map(|(new, &old)| (old, new as u32)).collect();
    let vertices: Vec<Point3<f64>> = used.iter().map(|&i| points[i]).collect();
    let mut triangles = Vec::with_capacity(hull.facets.len());
    for f in &hull.facets {
        let [a, b, c] = [f.vertices[0], f.vertices[1], f.vertices[2]];
        let n = Vector3::new(f.normal[0], f.normal[1], f.normal[2]);
        let winding = (points[b] - points[a]).cross(&(points[c] - points[a]));
        let tri = if winding.dot(&n) >= 0.0 { [a, b, c] } else { [a, c, b] };
        triangles.push(tri.map(|i| remap[&i]));
    }
    TriMesh::new(vertices, triangles)
}
