//! Stable resting poses from the convex hull's planar faces.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{convex_hull, rotation_between, Pose, TriMesh};
use crate::hull::{convex_hull_2d, polygon_area, polygon_inside_margin};

/// Minimum distance (m) between the COM projection and the support polygon boundary.
pub const STABILITY_MARGIN: f64 = 0.005;
/// A posed mesh rests on the ground when its lowest point is within this of z=0.
pub const REST_TOLERANCE: f64 = 1e-5;
/// Resting poses whose down directions differ by less than this are merged.
pub const MERGE_ANGLE_DEG: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct StablePose {
    pub pose: Pose,
    pub probability: f64,
    /// m^2
    pub support_area: f64,
    pub validated: bool,
    /// Row-major matrix as read from a library file; written back verbatim while it matches `pose`.
    pub source: Option<Vec<f64>>,
}

/// A planar face of a convex hull: coplanar adjacent triangles merged.
#[derive(Debug, Clone)]
pub struct HullFace {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub vertices: Vec<Point3<f64>>,
}

impl HullFace {
    /// Face polygon in an in-plane basis, counter-clockwise seen from outside.
    fn polygon(&self) -> (Vec<[f64; 2]>, Vector3<f64>, Vector3<f64>) {
        let u = crate::geom::any_perpendicular(&self.normal);
        let v = self.normal.cross(&u);
        let pts: Vec<[f64; 2]> = self
            .vertices
            .iter()
            .map(|p| [p.coords.dot(&u), p.coords.dot(&v)])
            .collect();
        let poly = convex_hull_2d(&pts).into_iter().map(|i| pts[i]).collect();
        (poly, u, v)
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.polygon().0)
    }

    /// Signed distance of the COM's projection (along the normal) from the
    /// face boundary; positive inside.
    pub fn com_margin(&self, com: &Point3<f64>) -> f64 {
        let (poly, u, v) = self.polygon();
        polygon_inside_margin(&poly, &[com.coords.dot(&u), com.coords.dot(&v)])
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Planar faces of a convex hull mesh.
pub fn hull_faces(hull: &TriMesh) -> Vec<HullFace> {
    let n = hull.triangles().len();
    let normals: Vec<Vector3<f64>> = (0..n).map(|i| hull.triangle_normal(i)).collect();
    let mut edges: std::collections::HashMap<(u32, u32), Vec<usize>> = std::collections::HashMap::new();
    for (t, tri) in hull.triangles().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    let scale = hull.aabb().extents().norm().max(f64::MIN_POSITIVE);
    let mut uf = UnionFind::new(n);
    for tris in edges.values() {
        if let [a, b] = tris[..] {
            let coplanar = normals[a].dot(&normals[b]) > 1.0 - 1e-10 && {
                let pa = hull.triangle(a)[0];
                hull.triangle(b)
                    .iter()
                    .all(|p| normals[a].dot(&(p - pa)).abs() <= 1e-9 * scale)
            };
            if coplanar {
                uf.union(a, b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for t in 0..n {
        groups.entry(uf.find(t)).or_default().push(t);
    }
    groups
        .into_values()
        .map(|tris| {
            let mut normal = Vector3::zeros();
            let mut ids: Vec<u32> = Vec::new();
            for &t in &tris {
                normal += normals[t] * hull.triangle_area(t);
                ids.extend_from_slice(&hull.triangles()[t]);
            }
            let normal = normal.normalize();
            ids.sort_unstable();
            ids.dedup();
            let vertices: Vec<Point3<f64>> = ids.iter().map(|&i| hull.vertices()[i as usize]).collect();
            let offset = vertices.iter().map(|p| normal.dot(&p.coords)).sum::<f64>() / vertices.len() as f64;
            HullFace { normal, offset, vertices }
        })
        .collect()
}

/// Pose that puts `face` down on z=0 with the COM above the origin.
pub fn resting_pose(mesh: &TriMesh, com: &Point3<f64>, down: &Vector3<f64>) -> Pose {
    let rotation = rotation_between(down, &-Vector3::z());
    let rotated = Pose::from_rotation(rotation);
    let min_z = mesh
        .vertices()
        .iter()
        .map(|p| rotated.transform_point(p).z)
        .fold(f64::INFINITY, f64::min);
    let c = rotated.transform_point(com);
    Pose::new(rotation, Vector3::new(-c.x, -c.y, -min_z))
}

/// Resting poses on the planar hull faces that hold the COM projection
/// at least [`STABILITY_MARGIN`] inside. Faces whose normals lie within
/// [`MERGE_ANGLE_DEG`] (transitively) collapse into one pose represented by
/// the largest face; probability is the merged support area over the total
/// qualifying area. Sorted by probability, descending.
pub fn compute_stable_poses(mesh: &TriMesh, com: &Point3<f64>) -> Result<Vec<StablePose>> {
    compute_stable_poses_with_margin(mesh, com, STABILITY_MARGIN)
}

pub fn compute_stable_poses_with_margin(mesh: &TriMesh, com: &Point3<f64>, margin: f64) -> Result<Vec<StablePose>> {
    mesh.check_watertight()?;
    let hull = convex_hull(mesh.vertices())?;
    let faces: Vec<(HullFace, f64)> = hull_faces(&hull)
        .into_iter()
        .filter(|f| f.com_margin(com) >= margin)
        .map(|f| {
            let area = f.area();
            (f, area)
        })
        .collect();
    if faces.is_empty() {
        return Err(Error::NoStablePose);
    }
    let cos_merge = MERGE_ANGLE_DEG.to_radians().cos();
    let mut uf = UnionFind::new(faces.len());
    for i in 0..faces.len() {
        for j in i + 1..faces.len() {
            if faces[i].0.normal.dot(&faces[j].0.normal) > cos_merge {
                uf.union(i, j);
            }
        }
    }
    let total: f64 = faces.iter().map(|f| f.1).sum();
    let mut clusters: std::collections::BTreeMap<usize, (usize, f64)> = std::collections::BTreeMap::new();
    for (i, (_, area)) in faces.iter().enumerate() {
        let root = uf.find(i);
        let entry = clusters.entry(root).or_insert((i, 0.0));
        entry.1 += area;
        if faces[i].1 > faces[entry.0].1 {
            entry.0 = i;
        }
    }
    let mut poses: Vec<StablePose> = clusters
        .into_values()
        .map(|(rep, area)| StablePose {
            pose: resting_pose(mesh, com, &faces[rep].0.normal),
            probability: area / total,
            support_area: faces[rep].1,
            validated: false,
            source: None,
        })
        .collect();
    poses.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    Ok(poses)
}

/// Ground-contact polygon of a posed mesh: hull of the vertices within
/// [`REST_TOLERANCE`] of z=0. `None` when the mesh does not rest on the ground.
pub fn support_polygon(mesh: &TriMesh, pose: &Pose) -> Option<Vec<[f64; 2]>> {
    let posed: Vec<Point3<f64>> = mesh.vertices().iter().map(|p| pose.transform_point(p)).collect();
    let min_z = posed.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    if !(min_z.abs() <= REST_TOLERANCE) {
        return None;
    }
    let contacts: Vec<[f64; 2]> = posed
        .iter()
        .filter(|p| p.z <= REST_TOLERANCE)
        .map(|p| [p.x, p.y])
        .collect();
    Some(convex_hull_2d(&contacts).into_iter().map(|i| contacts[i]).collect())
}

/// Static-equilibrium check of a posed mesh on the ground plane: it rests
/// on z=0 and the COM projects at least [`STABILITY_MARGIN`] inside the
/// ground-contact polygon.
pub fn is_statically_stable(mesh: &TriMesh, com: &Point3<f64>, pose: &Pose) -> bool {
    let Some(poly) = support_polygon(mesh, pose) else {
        return false;
    };
    let c = pose.transform_point(com);
    polygon_inside_margin(&poly, &[c.x, c.y]) >= STABILITY_MARGIN
}
