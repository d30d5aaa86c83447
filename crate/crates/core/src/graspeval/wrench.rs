//! Friction-cone wrench sets: epsilon quality and LP wrench resistance.

use std::f64::consts::TAU;

use nalgebra::{Point3, Vector3};

use super::{ContactPoint, EvalConfig};
use crate::geom::any_perpendicular;
use crate::hull::quickhull;
use crate::lp::{LinearProgram, Relation};

/// Below this length (metres) a projected direction is too short to orient
/// a friction cone.
const BASIS_EPS: f64 = 1e-9;

/// Cone edges of one contact. The tangent basis follows the contact
/// geometry, so the edge set moves rigidly with the contacts: the first
/// tangent points from the torque origin across the contact plane, else
/// towards the farthest other contact, else an arbitrary perpendicular.
pub fn cone_edges(contact: &ContactPoint, all: &[ContactPoint], origin: &Point3<f64>, edges: usize) -> Vec<Vector3<f64>> {
    let n = contact.normal;
    let project = |v: Vector3<f64>| v - n * n.dot(&v);
    let mut t1 = project(contact.position - origin);
    if t1.norm() <= BASIS_EPS {
        t1 = all
            .iter()
            .map(|c| project(c.position - contact.position))
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or_else(Vector3::zeros);
    }
    if t1.norm() <= BASIS_EPS {
        t1 = any_perpendicular(&n);
    }
    let t1 = t1.normalize();
    let t2 = n.cross(&t1);
    (0..edges)
        .map(|k| {
            let a = TAU * k as f64 / edges as f64;
            (n + contact.friction * (t1 * a.cos() + t2 * a.sin())).normalize()
        })
        .collect()
}

/// Torque normaliser: the largest contact distance from `origin`.
pub fn torque_scale(contacts: &[ContactPoint], origin: &Point3<f64>) -> f64 {
    let rho = contacts.iter().map(|c| (c.position - origin).norm()).fold(0.0, f64::max);
    if rho > BASIS_EPS {
        rho
    } else {
        1.0
    }
}

/// Unit edge forces with their torque about `origin` divided by `rho`, as
/// `(force, scaled torque, normal component)` per edge.
fn primitives(contacts: &[ContactPoint], origin: &Point3<f64>, edges: usize, rho: f64) -> Vec<([f64; 6], f64)> {
    let mut out = Vec::with_capacity(contacts.len() * edges);
    for c in contacts {
        let r = c.position - origin;
        for f in cone_edges(c, contacts, origin, edges) {
            let tau = r.cross(&f) / rho;
            out.push(([f.x, f.y, f.z, tau.x, tau.y, tau.z], f.dot(&c.normal)));
        }
    }
    out
}

/// Primitive wrenches `(f, (r x f) / rho)` of all cone edges.
pub fn primitive_wrenches(contacts: &[ContactPoint], origin: &Point3<f64>, config: &EvalConfig) -> Vec<[f64; 6]> {
    let rho = torque_scale(contacts, origin);
    primitives(contacts, origin, config.cone_edges, rho).into_iter().map(|(w, _)| w).collect()
}

/// Radius of the largest origin-centred ball inside the convex hull of the
/// primitive wrenches; 0 unless the origin is strictly interior.
pub fn force_closure_epsilon(contacts: &[ContactPoint], origin: &Point3<f64>, config: &EvalConfig) -> f64 {
    if contacts.is_empty() {
        return 0.0;
    }
    let points: Vec<f64> = primitive_wrenches(contacts, origin, config).into_iter().flatten().collect();
    // a hull that does not span all six dimensions cannot hold the origin
    // in its interior
    let Ok(hull) = quickhull(&points, 6) else {
        return 0.0;
    };
    let eps = hull.facets.iter().map(|f| f.offset).fold(f64::INFINITY, f64::min);
    if eps > hull.eps {
        eps
    } else {
        0.0
    }
}

/// Whether non-negative cone-edge forces with total normal force at most
/// `max_grip_force` can balance `wrench` (force N, torque N m about `origin`).
pub fn can_resist_wrench(contacts: &[ContactPoint], origin: &Point3<f64>, wrench: &[f64; 6], config: &EvalConfig) -> bool {
    if contacts.is_empty() {
        return wrench.iter().all(|v| *v == 0.0);
    }
    let rho = torque_scale(contacts, origin);
    let prims = primitives(contacts, origin, config.cone_edges, rho);
    let mut lp = LinearProgram::new(prims.len());
    let target: [f64; 6] = std::array::from_fn(|i| if i < 3 { -wrench[i] } else { -wrench[i] / rho });
    for (axis, rhs) in target.iter().enumerate() {
        let row: Vec<f64> = prims.iter().map(|(w, _)| w[axis]).collect();
        lp.constraint(&row, Relation::Eq, *rhs);
    }
    let budget: Vec<f64> = prims.iter().map(|(_, n)| *n).collect();
    lp.constraint(&budget, Relation::Le, config.max_grip_force);
    lp.solve().is_feasible()
}
