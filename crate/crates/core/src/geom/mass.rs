use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::mesh::TriMesh;
use crate::error::{Error, Result};

/// Uniform-density mass properties of a closed mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    pub mass: f64,
    /// m^3
    pub volume: f64,
    pub center_of_mass: Point3<f64>,
    /// kg m^2 about the centre of mass, in the mesh frame.
    pub inertia: Matrix3<f64>,
}

/// Signed-tetrahedron integration of volume, first and second moments,
/// scaled to the requested total mass.
pub fn mass_properties(mesh: &TriMesh, mass: f64) -> Result<MassProperties> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
    }
    mesh.check_watertight()?;
    // integrate relative to the box centre to keep the sums well conditioned
    let reference = mesh.aabb().center();
    let mut volume = 0.0;
    let mut first = Vector3::zeros();
    let mut second = Matrix3::zeros();
    for &[i, j, k] in mesh.triangles() {
        let a = mesh.vertices()[i as usize] - reference;
        let b = mesh.vertices()[j as usize] - reference;
        let c = mesh.vertices()[k as usize] - reference;
        let v = a.dot(&b.cross(&c)) / 6.0;
        let s = a + b + c;
        volume += v;
        first += s * (v / 4.0);
        second += (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose()) * (v / 20.0);
    }
    if volume <= super::mesh::WATERTIGHT_VOLUME_EPS {
        return Err(Error::NonWatertight(format!(
            "signed volume {volume:e} is not positive (inward-facing or open mesh)"
        )));
    }
    let com_rel = first / volume;
    let density = mass / volume;
    // second moment about the COM
    let cov = (second - com_rel * com_rel.transpose() * volume) * density;
    let inertia = Matrix3::identity() * cov.trace() - cov;
    let inertia = (inertia + inertia.transpose()) * 0.5;
    Ok(MassProperties {
        mass,
        volume,
        center_of_mass: reference + com_rel,
        inertia,
    })
}
