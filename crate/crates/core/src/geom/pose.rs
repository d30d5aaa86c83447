use nalgebra::{Isometry3, Matrix3, Matrix4, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rigid transform: rotation (unit quaternion) followed by translation, in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pose(pub Isometry3<f64>);

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose(Isometry3::identity())
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose(Isometry3::from_parts(Translation3::from(translation), rotation))
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Pose::new(UnitQuaternion::identity(), t)
    }

    pub fn from_rotation(r: UnitQuaternion<f64>) -> Self {
        Pose::new(r, Vector3::zeros())
    }

    /// Rotation by `angle` radians about the world z axis.
    pub fn yaw(angle: f64) -> Self {
        Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle))
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.0.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.translation.vector
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.0.rotation.to_rotation_matrix().matrix()
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.0.transform_point(p)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.transform_vector(v)
    }

    pub fn inverse(&self) -> Pose {
        Pose(self.0.inverse())
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose(self.0 * other.0)
    }

    /// Rotation angle of the twist about world z in the swing-twist split.
    /// Returns 0 when the twist is undefined (a half-turn about a horizontal axis).
    pub fn yaw_angle(&self) -> f64 {
        let q = self.0.rotation.quaternion();
        let (w, z) = (q.w, q.k);
        if w.abs() < 1e-12 && z.abs() < 1e-12 {
            return 0.0;
        }
        2.0 * z.atan2(w)
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.0.to_homogeneous();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = m[(r, c)];
            }
        }
        out
    }

    /// Parse a row-major 4x4 homogeneous matrix. The rotation block must be
    /// orthonormal to within `1e-6` (text files carry 9 significant digits);
    /// it is re-orthonormalised on the way in.
    pub fn from_row_major(m: &[f64]) -> Result<Pose> {
        if m.len() != 16 {
            return Err(Error::schema(
                "pose",
                format!("expected 16 floats, found {}", m.len()),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::schema("pose", "non-finite entry"));
        }
        let h = Matrix4::from_row_slice(m);
        let bottom = [h[(3, 0)], h[(3, 1)], h[(3, 2)], h[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::schema("pose", "last row must be [0, 0, 0, 1]"));
        }
        let r: Matrix3<f64> = h.fixed_view::<3, 3>(0, 0).into_owned();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > 1e-6 || r.determinant() < 0.0 {
            return Err(Error::schema("pose", "rotation block is not a proper rotation"));
        }
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
        let q = UnitQuaternion::new_normalize(q.into_inner());
        let t = Vector3::new(h[(0, 3)], h[(1, 3)], h[(2, 3)]);
        Ok(Pose::new(q, t))
    }

    /// Largest absolute difference between the homogeneous matrices.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        let a = self.to_row_major();
        let b = other.to_row_major();
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// Minimal rotation taking unit vector `from` onto unit vector `to`.
/// Antiparallel inputs rotate by a half-turn about an axis perpendicular to `from`.
pub fn rotation_between(from: &Vector3<f64>, to: &Vector3<f64>) -> UnitQuaternion<f64> {
    if let Some(q) = UnitQuaternion::rotation_between(from, to) {
        return q;
    }
    let axis = any_perpendicular(from);
    UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), std::f64::consts::PI)
}

/// A unit vector perpendicular to `v`, built from the world axis least aligned with it.
pub fn any_perpendicular(v: &Vector3<f64>) -> Vector3<f64> {
    let a = v.abs();
    let helper = if a.x <= a.y && a.x <= a.z {
        Vector3::x()
    } else if a.y <= a.z {
        Vector3::y()
    } else {
        Vector3::z()
    };
    v.cross(&helper).normalize()
}
