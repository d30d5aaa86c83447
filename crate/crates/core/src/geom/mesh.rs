use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::pose::Pose;
use crate::error::{Error, Result};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn join(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extents(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn inflated(&self, margin: f64) -> Aabb {
        let m = Vector3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn overlaps(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }

    /// Slab test; returns the parametric entry and exit distances when the
    /// ray's segment `[t_min, t_max]` touches the box.
    pub fn ray_interval(
        &self,
        origin: &Point3<f64>,
        inv_dir: &Vector3<f64>,
        t_min: f64,
        t_max: f64,
    ) -> Option<(f64, f64)> {
        let mut lo = t_min;
        let mut hi = t_max;
        for i in 0..3 {
            let mut t0 = (self.min[i] - origin[i]) * inv_dir[i];
            let mut t1 = (self.max[i] - origin[i]) * inv_dir[i];
            if t0.is_nan() || t1.is_nan() {
                // origin on a slab plane with a zero direction component
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            lo = lo.max(t0);
            hi = hi.min(t1);
            if lo > hi {
                return None;
            }
        }
        Some((lo, hi))
    }
}

/// Indexed triangle mesh in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Builds a mesh, checking index range, finiteness and that no triangle
    /// repeats a vertex index.
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|v| !v.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::MalformedMesh(format!("vertex {i} has a non-finite coordinate")));
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i as usize >= n) {
                return Err(Error::MalformedMesh(format!(
                    "triangle {t} references vertex {bad} but the mesh has {n} vertices"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::MalformedMesh(format!("triangle {t} repeats a vertex index")));
            }
        }
        Ok(TriMesh { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unit normal from the winding order (counter-clockwise = outward).
    pub fn triangle_normal(&self, i: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(i);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn triangle_area(&self, i: usize) -> f64 {
        let [a, b, c] = self.triangle(i);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.triangle_area(i)).sum()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn scaled(&self, s: f64) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| Point3::from(v.coords * s)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn transformed(&self, pose: &Pose) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| pose.transform_point(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Signed enclosed volume (positive for outward-oriented closed meshes).
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (
                    self.vertices[a as usize].coords,
                    self.vertices[b as usize].coords,
                    self.vertices[c as usize].coords,
                );
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Every undirected edge is shared by exactly two triangles.
    pub fn is_edge_manifold_closed(&self) -> bool {
        let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        !counts.is_empty() && counts.values().all(|&c| c == 2)
    }

    /// Watertight per the toolkit's policy: closed edge-manifold and
    /// `|signed volume| > 1e-12 m^3`.
    pub fn check_watertight(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if !self.is_edge_manifold_closed() {
            return Err(Error::NonWatertight(
                "some edge is not shared by exactly two triangles".into(),
            ));
        }
        let v = self.signed_volume();
        if v.abs() <= WATERTIGHT_VOLUME_EPS {
            return Err(Error::NonWatertight(format!("enclosed volume {v:e} is ~0")));
        }
        Ok(())
    }

    /// Vertices are welded when bitwise equal; used by loaders whose formats
    /// repeat vertices per facet.
    pub(crate) fn from_triangle_soup(soup: Vec<[Point3<f64>; 3]>) -> Result<TriMesh> {
        let mut index: HashMap<[u64; 3], u32> = HashMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(soup.len());
        for (t, tri) in soup.iter().enumerate() {
            let mut ids = [0u32; 3];
            for (k, p) in tri.iter().enumerate() {
                if !p.coords.iter().all(|c| c.is_finite()) {
                    return Err(Error::MalformedMesh(format!("facet {t} has a non-finite coordinate")));
                }
                // normalise -0.0 so it welds with 0.0
                let key = [
                    (p.x + 0.0).to_bits(),
                    (p.y + 0.0).to_bits(),
                    (p.z + 0.0).to_bits(),
                ];
                ids[k] = *index.entry(key).or_insert_with(|| {
                    vertices.push(*p);
                    (vertices.len() - 1) as u32
                });
            }
            if ids[0] == ids[1] || ids[1] == ids[2] || ids[0] == ids[2] {
                log::debug!("dropping degenerate facet {t}");
                continue;
            }
            triangles.push(ids);
        }
        TriMesh::new(vertices, triangles)
    }

    /// Axis-aligned box with the given full extents centred at `center`.
    pub fn cuboid(center: Point3<f64>, extents: Vector3<f64>) -> TriMesh {
        let h = extents / 2.0;
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8 {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            vertices.push(center + Vector3::new(sx * h.x, sy * h.y, sz * h.z));
        }
        let triangles = vec![
            [0, 2, 3], [0, 3, 1], // -z
            [4, 5, 7], [4, 7, 6], // +z
            [0, 1, 5], [0, 5, 4], // -y
            [2, 6, 7], [2, 7, 3], // +y
            [0, 4, 6], [0, 6, 2], // -x
            [1, 3, 7], [1, 7, 5], // +x
        ];
        TriMesh { vertices, triangles }
    }

    /// Closed cylinder about z with `segments` sides, base at z=0.
    pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriMesh {
        let n = segments.max(3);
        let mut vertices = Vec::with_capacity(2 * n + 2);
        for i in 0..n {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            let (s, c) = a.sin_cos();
            vertices.push(Point3::new(radius * c, radius * s, 0.0));
            vertices.push(Point3::new(radius * c, radius * s, height));
        }
        let bottom = vertices.len() as u32;
        vertices.push(Point3::new(0.0, 0.0, 0.0));
        let top = bottom + 1;
        vertices.push(Point3::new(0.0, 0.0, height));
        let mut triangles = Vec::with_capacity(4 * n);
        for i in 0..n as u32 {
            let j = (i + 1) % n as u32;
            let (b0, t0, b1, t1) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            triangles.push([b0, b1, t1]);
            triangles.push([b0, t1, t0]);
            triangles.push([bottom, b1, b0]);
            triangles.push([top, t0, t1]);
        }
        TriMesh { vertices, triangles }
    }
}

pub const WATERTIGHT_VOLUME_EPS: f64 = 1e-12;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cuboid_is_closed_and_outward() {
        let m = TriMesh::cuboid(Point3::new(0.5, 0.5, 0.5), Vector3::repeat(1.0));
        assert!(m.check_watertight().is_ok());
        assert_relative_eq!(m.signed_volume(), 1.0, epsilon = 1e-12);
        for i in 0..12 {
            let [a, b, c] = m.triangle(i);
            let centroid = (a.coords + b.coords + c.coords) / 3.0;
            let out = centroid - Vector3::repeat(0.5);
            assert!(m.triangle_normal(i).dot(&out) > 0.0);
        }
    }

    #[test]
    fn cylinder_is_closed_and_outward() {
        let m = TriMesh::cylinder(0.03, 0.1, 32);
        assert!(m.check_watertight().is_ok());
        let expected = 0.5 * 32.0 * 0.03f64.powi(2) * (std::f64::consts::TAU / 32.0).sin() * 0.1;
        assert_relative_eq!(m.signed_volume(), expected, epsilon = 1e-12);
    }

    #[test]
    fn rejects_repeated_index_and_range() {
        let v = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert!(matches!(TriMesh::new(v.clone(), vec![[0, 0, 1]]), Err(Error::MalformedMesh(_))));
        assert!(matches!(TriMesh::new(v.clone(), vec![[0, 1, 3]]), Err(Error::MalformedMesh(_))));
        let bad = vec![Point3::new(f64::NAN, 0.0, 0.0)];
        assert!(TriMesh::new(bad, vec![]).is_err());
    }

    #[test]
    fn open_sheet_is_not_watertight() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let m = TriMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap();
        assert!(matches!(m.check_watertight(), Err(Error::NonWatertight(_))));
    }

    #[test]
    fn ray_interval_axis_parallel() {
        let b = Aabb { min: Point3::origin(), max: Point3::new(1.0, 1.0, 1.0) };
        let o = Point3::new(-1.0, 0.5, 0.5);
        let d = Vector3::new(1.0, 0.0, 0.0);
        let inv = d.map(|c| 1.0 / c);
        assert_eq!(b.ray_interval(&o, &inv, 0.0, 10.0), Some((1.0, 2.0)));
        let o = Point3::new(-1.0, 2.0, 0.5);
        assert_eq!(b.ray_interval(&o, &inv, 0.0, 10.0), None);
    }
}
