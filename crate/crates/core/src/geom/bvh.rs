//! Bounding volume hierarchy over mesh triangles and ray queries.

use nalgebra::{Point3, Vector3};

use super::mesh::{Aabb, TriMesh};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf { start: u32, count: u32 },
    Inner { left: u32, right: u32 },
}

#[derive(Debug, Clone)]
struct Node {
    aabb: Aabb,
    kind: NodeKind,
}

/// Nearest-hit record returned by ray queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub point: Point3<f64>,
    pub triangle: usize,
    /// Outward normal of the hit triangle (from its winding).
    pub normal: Vector3<f64>,
}

/// Immutable BVH. Owns a copy of the triangle geometry so it can be shared
/// across threads independently of the mesh it was built from.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    tris: Vec<[Point3<f64>; 3]>,
    normals: Vec<Vector3<f64>>,
}

/// Moller-Trumbore, double sided, edges inclusive. Returns the ray
/// parameter of the hit.
pub fn intersect_triangle(origin: &Point3<f64>, dir: &Vector3<f64>, tri: &[Point3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

impl Bvh {
    pub fn new(mesh: &TriMesh) -> Bvh {
        let n = mesh.triangles().len();
        let tris: Vec<_> = (0..n).map(|i| mesh.triangle(i)).collect();
        let normals = (0..n).map(|i| mesh.triangle_normal(i)).collect();
        let boxes: Vec<Aabb> = tris.iter().map(|t| Aabb::from_points(t.iter())).collect();
        let centroids: Vec<Point3<f64>> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::with_capacity(2 * n / LEAF_SIZE + 1);
        if n > 0 {
            build(&mut nodes, &mut order, 0, n, &boxes, &centroids);
        }
        Bvh { nodes, order, tris, normals }
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn triangle(&self, i: usize) -> &[Point3<f64>; 3] {
        &self.tris[i]
    }

    pub fn normal(&self, i: usize) -> Vector3<f64> {
        self.normals[i]
    }

    pub fn aabb(&self) -> Aabb {
        self.nodes.first().map_or_else(Aabb::empty, |n| n.aabb)
    }

    fn hit(&self, origin: &Point3<f64>, dir: &Vector3<f64>, tri: usize, t: f64) -> RayHit {
        RayHit {
            distance: t,
            point: origin + dir * t,
            triangle: tri,
            normal: self.normals[tri],
        }
    }

    /// Nearest intersection with parameter in `[t_min, t_max]`; ties on
    /// distance resolve to the lowest triangle index.
    pub fn raycast(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_min: f64, t_max: f64) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|c| 1.0 / c);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let limit = best.map_or(t_max, |(t, _)| t);
            let Some((enter, _)) = node.aabb.ray_interval(origin, &inv, t_min, limit) else {
                continue;
            };
            if enter > limit {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &tri in &self.order[start as usize..(start + count) as usize] {
                        let tri = tri as usize;
                        if let Some(t) = intersect_triangle(origin, dir, &self.tris[tri]) {
                            if t < t_min || t > t_max {
                                continue;
                            }
                            let better = match best {
                                None => true,
                                Some((bt, bi)) => t < bt || (t == bt && tri < bi),
                            };
                            if better {
                                best = Some((t, tri));
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best.map(|(t, tri)| self.hit(origin, dir, tri, t))
    }

    /// Every intersection in `[t_min, t_max]`, sorted by distance then triangle index.
    pub fn raycast_all(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_min: f64, t_max: f64) -> Vec<RayHit> {
        let inv = dir.map(|c| 1.0 / c);
        let mut hits = Vec::new();
        if self.nodes.is_empty() {
            return hits;
        }
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.aabb.ray_interval(origin, &inv, t_min, t_max).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &tri in &self.order[start as usize..(start + count) as usize] {
                        let tri = tri as usize;
                        if let Some(t) = intersect_triangle(origin, dir, &self.tris[tri]) {
                            if t >= t_min && t <= t_max {
                                hits.push(self.hit(origin, dir, tri, t));
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        hits.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.triangle.cmp(&b.triangle)));
        hits
    }

    /// Calls `f` with every triangle whose box overlaps `query`.
    pub fn for_each_overlapping(&self, query: &Aabb, mut f: impl FnMut(usize) -> bool) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if !node.aabb.overlaps(query) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &tri in &self.order[start as usize..(start + count) as usize] {
                        let tri = tri as usize;
                        if Aabb::from_points(self.tris[tri].iter()).overlaps(query) && f(tri) {
                            return;
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
    }

    /// Inside test for closed meshes: crossing parity along three fixed
    /// skew directions, majority vote.
    pub fn contains_point(&self, p: &Point3<f64>) -> bool {
        if !self.aabb().inflated(1e-12).overlaps(&Aabb { min: *p, max: *p }) {
            return false;
        }
        const DIRS: [[f64; 3]; 3] = [
            [0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
            [-0.3015113445777636, 0.9045340337332909, 0.3015113445777636],
            [0.2672612419124244, -0.5345224838248488, 0.8017837257372732],
        ];
        let votes = DIRS
            .iter()
            .filter(|d| {
                let d = Vector3::new(d[0], d[1], d[2]);
                self.raycast_all(p, &d, 0.0, f64::INFINITY).len() % 2 == 1
            })
            .count();
        votes >= 2
    }

    #[cfg(test)]
    pub(crate) fn check_structure(&self) -> bool {
        let mut seen = vec![0u32; self.tris.len()];
        let mut ok = true;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &t in &self.order[start as usize..(start + count) as usize] {
                        seen[t as usize] += 1;
                        ok &= node.aabb.contains(&Aabb::from_points(self.tris[t as usize].iter()));
                    }
                }
                NodeKind::Inner { left, right } => {
                    for c in [left, right] {
                        ok &= node.aabb.contains(&self.nodes[c as usize].aabb);
                        stack.push(c);
                    }
                }
            }
        }
        ok && seen.iter().all(|&c| c == 1)
    }
}

fn build(
    nodes: &mut Vec<Node>,
    order: &mut [u32],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centroids: &[Point3<f64>],
) -> u32 {
    let slice = &mut order[start..end];
    let aabb = slice.iter().fold(Aabb::empty(), |b, &t| b.join(&boxes[t as usize]));
    let me = nodes.len() as u32;
    nodes.push(Node {
        aabb,
        kind: NodeKind::Leaf {
            start: start as u32,
            count: (end - start) as u32,
        },
    });
    if end - start <= LEAF_SIZE {
        return me;
    }
    let cb = Aabb::from_points(slice.iter().map(|&t| &centroids[t as usize]));
    let ext = cb.extents();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    if ext[axis] <= 0.0 {
        return me;
    }
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    let left = build(nodes, order, start, start + mid, boxes, centroids);
    let right = build(nodes, order, start + mid, end, boxes, centroids);
    nodes[me as usize].kind = NodeKind::Inner { left, right };
    me
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::sample::sample_surface;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn unit_cube() -> TriMesh {
        TriMesh::cuboid(Point3::new(0.5, 0.5, 0.5), Vector3::repeat(1.0))
    }

    #[test]
    fn axis_aligned_hit_and_miss() {
        let bvh = Bvh::new(&unit_cube());
        let hit = bvh
            .raycast(&Point3::new(-1.0, 0.5, 0.5), &Vector3::x(), 0.0, f64::INFINITY)
            .unwrap();
        assert_relative_eq!(hit.distance, 1.0, epsilon = 1e-15);
        assert_relative_eq!(hit.point, Point3::new(0.0, 0.5, 0.5), epsilon = 1e-15);
        assert_relative_eq!(hit.normal, -Vector3::x(), epsilon = 1e-15);
        assert!(bvh
            .raycast(&Point3::new(-1.0, 2.0, 2.0), &Vector3::x(), 0.0, f64::INFINITY)
            .is_none());
    }

    #[test]
    fn respects_interval() {
        let bvh = Bvh::new(&unit_cube());
        let o = Point3::new(-1.0, 0.3, 0.4);
        let far = bvh.raycast(&o, &Vector3::x(), 1.5, 10.0).unwrap();
        assert_relative_eq!(far.distance, 2.0, epsilon = 1e-15);
        assert!(bvh.raycast(&o, &Vector3::x(), 0.0, 0.5).is_none());
        assert_eq!(bvh.raycast_all(&o, &Vector3::x(), 0.0, 10.0).len(), 2);
    }

    #[test]
    fn structure_and_brute_force_agreement() {
        let cyl = TriMesh::cylinder(0.3, 1.0, 100);
        let bvh = Bvh::new(&cyl);
        assert!(bvh.check_structure());
        let mut rng = crate::rng::seeded(11);
        for _ in 0..2000 {
            let o = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-0.5..1.5));
            let d = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
            let got = bvh.raycast(&o, &d, 0.0, f64::INFINITY);
            let mut best: Option<(f64, usize)> = None;
            for i in 0..cyl.triangles().len() {
                if let Some(t) = intersect_triangle(&o, &d, &cyl.triangle(i)) {
                    if t >= 0.0 && best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, i));
                    }
                }
            }
            assert_eq!(got.map(|h| (h.distance, h.triangle)), best);
        }
    }

    #[test]
    fn containment() {
        let bvh = Bvh::new(&unit_cube());
        assert!(bvh.contains_point(&Point3::new(0.5, 0.5, 0.5)));
        assert!(bvh.contains_point(&Point3::new(0.01, 0.99, 0.2)));
        assert!(!bvh.contains_point(&Point3::new(1.5, 0.5, 0.5)));
        for s in sample_surface(&unit_cube(), 50, 3).unwrap() {
            let inside = s.point - s.normal * 1e-6;
            assert!(bvh.contains_point(&inside));
        }
    }
}
