use nalgebra::{Point3, Vector3};
use rand::Rng;

use super::mesh::TriMesh;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub point: Point3<f64>,
    /// Outward unit normal of the sampled triangle.
    pub normal: Vector3<f64>,
    pub triangle: usize,
}

/// Area-weighted uniform samples on the mesh surface.
pub fn sample_surface(mesh: &TriMesh, count: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut cumulative = Vec::with_capacity(mesh.triangles().len());
    let mut total = 0.0;
    for i in 0..mesh.triangles().len() {
        total += mesh.triangle_area(i);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(Error::EmptyMesh);
    }
    let mut rng = rng::seeded(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let target = rng.random::<f64>() * total;
        let tri = cumulative
            .partition_point(|&c| c <= target)
            .min(cumulative.len() - 1);
        let [a, b, c] = mesh.triangle(tri);
        let r1 = rng.random::<f64>().sqrt();
        let r2 = rng.random::<f64>();
        let point = Point3::from(a.coords * (1.0 - r1) + b.coords * (r1 * (1.0 - r2)) + c.coords * (r1 * r2));
        out.push(SurfaceSample {
            point,
            normal: mesh.triangle_normal(tri),
            triangle: tri,
        });
    }
    Ok(out)
}

/// Distance from `p` to the closest point of triangle `tri`.
pub fn point_triangle_distance(p: &Point3<f64>, tri: &[Point3<f64>; 3]) -> f64 {
    (p - closest_point_on_triangle(p, tri)).norm()
}

/// Closest point on a triangle (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point3<f64>, tri: &[Point3<f64>; 3]) -> Point3<f64> {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
