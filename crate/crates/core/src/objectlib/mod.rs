//! Object library: ingestion, stable poses, persistence and derived files.

mod stable;
mod yaml;

pub use stable::{
    compute_stable_poses, compute_stable_poses_with_margin, hull_faces, is_statically_stable, resting_pose,
    support_polygon, HullFace, StablePose, MERGE_ANGLE_DEG, REST_TOLERANCE, STABILITY_MARGIN,
};
pub use yaml::{
    load_library, parse_library_yaml, save_library, LibraryDocument, ObjectEntry, PoseEntry, LIBRARY_VERSION,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{convex_hull, load_mesh, mass_properties, write_stl_binary, MassProperties, Pose, TriMesh};
use crate::hull::polygon_area;

/// Coulomb friction coefficient used when an object does not specify one.
pub const DEFAULT_FRICTION: f64 = 0.24;

/// User-supplied description of an object to ingest.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub identifier: String,
    pub mesh_path: PathBuf,
    /// kg
    pub mass: f64,
    pub friction: Option<f64>,
    pub scale: Option<f64>,
}

impl ObjectSpec {
    pub fn new(identifier: impl Into<String>, mesh_path: impl Into<PathBuf>, mass: f64) -> Self {
        ObjectSpec {
            identifier: identifier.into(),
            mesh_path: mesh_path.into(),
            mass,
            friction: None,
            scale: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.identifier.trim().is_empty() {
            return Err(Error::invalid("identifier", "must not be empty"));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid("mass", format!("must be positive, got {}", self.mass)));
        }
        if let Some(f) = self.friction {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::invalid("friction", format!("must be positive, got {f}")));
            }
        }
        if let Some(s) = self.scale {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("scale", format!("must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// A library entry with its scaled mesh, physical properties and resting poses.
#[derive(Debug, Clone)]
pub struct ObjectType {
    pub identifier: String,
    pub mesh_path: PathBuf,
    /// Scaled to metres.
    pub mesh: Arc<TriMesh>,
    pub mass: f64,
    pub friction: f64,
    pub scale: f64,
    pub stable_poses: Vec<StablePose>,
    pub mass_properties: MassProperties,
}

impl ObjectType {
    /// Loads and scales the mesh, computes mass properties and validated
    /// stable poses. Writes nothing to disk; see [`ingest_object`].
    pub fn from_spec(spec: &ObjectSpec) -> Result<ObjectType> {
        spec.validate()?;
        let scale = spec.scale.unwrap_or(1.0);
        let mesh = load_mesh(&spec.mesh_path, scale)?;
        Self::from_mesh(spec, mesh)
    }

    /// As [`ObjectType::from_spec`] for a mesh already in memory (already scaled).
    pub fn from_mesh(spec: &ObjectSpec, mesh: TriMesh) -> Result<ObjectType> {
        spec.validate()?;
        let mass_properties = mass_properties(&mesh, spec.mass)?;
        let mut object = ObjectType {
            identifier: spec.identifier.clone(),
            mesh_path: spec.mesh_path.clone(),
            mesh: Arc::new(mesh),
            mass: spec.mass,
            friction: spec.friction.unwrap_or(DEFAULT_FRICTION),
            scale: spec.scale.unwrap_or(1.0),
            stable_poses: Vec::new(),
            mass_properties,
        };
        let mut poses = compute_stable_poses(&object.mesh, &object.mass_properties.center_of_mass)?;
        for p in poses.iter_mut() {
            p.validated = validate_stable_pose(&object, &p.pose);
        }
        poses.retain(|p| p.validated);
        let total: f64 = poses.iter().map(|p| p.probability).sum();
        if poses.is_empty() || total <= 0.0 {
            return Err(Error::NoStablePose);
        }
        for p in poses.iter_mut() {
            p.probability /= total;
        }
        object.stable_poses = poses;
        Ok(object)
    }

    pub fn com(&self) -> nalgebra::Point3<f64> {
        self.mass_properties.center_of_mass
    }

    /// Support polygon area of the object resting in `pose`, or 0.
    pub fn support_area(&self, pose: &Pose) -> f64 {
        support_polygon(&self.mesh, pose).map_or(0.0, |p| polygon_area(&p).abs())
    }

    pub fn urdf(&self, visual_mesh: &str, collision_mesh: &str) -> String {
        let mp = &self.mass_properties;
        let c = mp.center_of_mass;
        let i = mp.inertia;
        let id = xml_escape(&self.identifier);
        format!(
            r#"<?xml version="1.0"?>
<robot name="{id}">
  <link name="{id}">
    <contact>
      <lateral_friction value="{friction}"/>
    </contact>
    <inertial>
      <origin xyz="{cx} {cy} {cz}" rpy="0 0 0"/>
      <mass value="{mass}"/>
      <inertia ixx="{ixx}" ixy="{ixy}" ixz="{ixz}" iyy="{iyy}" iyz="{iyz}" izz="{izz}"/>
    </inertial>
    <visual>
      <origin xyz="0 0 0" rpy="0 0 0"/>
      <geometry>
        <mesh filename="{visual}" scale="{s} {s} {s}"/>
      </geometry>
    </visual>
    <collision>
      <origin xyz="0 0 0" rpy="0 0 0"/>
      <geometry>
        <mesh filename="{collision}" scale="1 1 1"/>
      </geometry>
    </collision>
  </link>
</robot>
"#,
            friction = self.friction,
            cx = c.x,
            cy = c.y,
            cz = c.z,
            mass = self.mass,
            ixx = i[(0, 0)],
            ixy = i[(0, 1)],
            ixz = i[(0, 2)],
            iyy = i[(1, 1)],
            iyz = i[(1, 2)],
            izz = i[(2, 2)],
            visual = xml_escape(visual_mesh),
            collision = xml_escape(collision_mesh),
            s = self.scale,
        )
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static-equilibrium re-check of `object` placed in `pose` on the ground.
pub fn validate_stable_pose(object: &ObjectType, pose: &Pose) -> bool {
    is_statically_stable(&object.mesh, &object.com(), pose)
}

/// Paths of the files written next to the source mesh by [`ingest_object`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedFiles {
    pub urdf: PathBuf,
    pub hull: PathBuf,
}

pub fn derived_file_paths(object: &ObjectType) -> DerivedFiles {
    let dir = object.mesh_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let stem = sanitize_file_stem(&object.identifier);
    DerivedFiles {
        urdf: dir.join(format!("{stem}.urdf")),
        hull: dir.join(format!("{stem}_hull.stl")),
    }
}

fn sanitize_file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Builds the object and writes its URDF and convex-hull collision mesh
/// (binary STL, metres) alongside the source mesh.
pub fn ingest_object(spec: &ObjectSpec) -> Result<(ObjectType, DerivedFiles)> {
    let object = ObjectType::from_spec(spec)?;
    let files = export_derived_files(&object)?;
    Ok((object, files))
}

pub fn export_derived_files(object: &ObjectType) -> Result<DerivedFiles> {
    let files = derived_file_paths(object);
    let hull = convex_hull(object.mesh.vertices())?;
    std::fs::write(&files.hull, write_stl_binary(&hull)).map_err(|e| Error::io(&files.hull, e))?;
    let file_name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let urdf = object.urdf(&file_name(&object.mesh_path), &file_name(&files.hull));
    std::fs::write(&files.urdf, urdf).map_err(|e| Error::io(&files.urdf, e))?;
    Ok(files)
}

/// Named collection of object types keyed by identifier.
#[derive(Debug, Clone, Default)]
pub struct ObjectLibrary {
    pub name: String,
    pub objects: BTreeMap<String, ObjectType>,
}

impl ObjectLibrary {
    pub fn new(name: impl Into<String>) -> Self {
        ObjectLibrary {
            name: name.into(),
            objects: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: &str) -> Result<&ObjectType> {
        self.objects.get(id).ok_or_else(|| Error::UnknownObjectId(id.to_string()))
    }

    /// Adds an object; identifiers must be unique.
    pub fn insert(&mut self, object: ObjectType) -> Result<()> {
        if self.objects.contains_key(&object.identifier) {
            return Err(Error::invalid(
                "identifier",
                format!("`{}` already exists in the library", object.identifier),
            ));
        }
        self.objects.insert(object.identifier.clone(), object);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.objects.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{UnitQuaternion, Vector3};

    const CUBE_OBJ: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nv 0 0 1\nv 1 0 1\nv 0 1 1\nv 1 1 1\n\
f 1 3 4 2\nf 5 6 8 7\nf 1 2 6 5\nf 3 7 8 4\nf 1 5 7 3\nf 2 4 8 6\n";

    fn cube_spec(dir: &Path) -> ObjectSpec {
        let p = dir.join("cube.obj");
        std::fs::write(&p, CUBE_OBJ).unwrap();
        let mut spec = ObjectSpec::new("cube", p, 0.1);
        spec.scale = Some(0.05);
        spec
    }

    #[test]
    fn ingest_scaled_cube() {
        let dir = tempfile::tempdir().unwrap();
        let (obj, files) = ingest_object(&cube_spec(dir.path())).unwrap();
        assert_eq!(obj.stable_poses.len(), 6);
        assert!(obj.stable_poses.iter().all(|p| p.validated));
        assert_eq!(obj.friction, DEFAULT_FRICTION);
        assert!((obj.mass_properties.volume - 0.05f64.powi(3)).abs() < 1e-15);
        let urdf = std::fs::read_to_string(&files.urdf).unwrap();
        assert!(urdf.contains(r#"<mass value="0.1"/>"#));
        assert!(urdf.contains(r#"filename="cube_hull.stl""#));
        assert!(urdf.contains(r#"<lateral_friction value="0.24"/>"#));
        let hull = crate::geom::load_mesh(&files.hull, 1.0).unwrap();
        assert_eq!(hull.triangles().len(), 12);
    }

    #[test]
    fn rejects_bad_specs() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = cube_spec(dir.path());
        spec.mass = -1.0;
        assert!(matches!(ObjectType::from_spec(&spec), Err(Error::InvalidParameter { name: "mass", .. })));
        let mut spec = cube_spec(dir.path());
        spec.friction = Some(0.0);
        assert!(ObjectType::from_spec(&spec).is_err());
        let mut spec = cube_spec(dir.path());
        spec.identifier = " ".into();
        assert!(ObjectType::from_spec(&spec).is_err());
    }

    #[test]
    fn stable_pose_validation() {
        let dir = tempfile::tempdir().unwrap();
        let obj = ObjectType::from_spec(&cube_spec(dir.path())).unwrap();
        for p in &obj.stable_poses {
            assert!(validate_stable_pose(&obj, &p.pose));
            assert!((obj.support_area(&p.pose) - 0.0025).abs() < 1e-12);
        }
        let tilt = Pose::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 30f64.to_radians()));
        let lift = -obj.mesh.transformed(&tilt).aabb().min.z;
        let tilted = Pose::from_translation(Vector3::new(0.0, 0.0, lift)).compose(&tilt);
        assert!(!validate_stable_pose(&obj, &tilted));
        let floating = Pose::from_translation(Vector3::new(0.0, 0.0, 0.1)).compose(&obj.stable_poses[0].pose);
        assert!(!validate_stable_pose(&obj, &floating));
    }

    #[test]
    fn duplicate_identifier_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let obj = ObjectType::from_spec(&cube_spec(dir.path())).unwrap();
        let mut lib = ObjectLibrary::new("l");
        lib.insert(obj.clone()).unwrap();
        assert!(lib.insert(obj).is_err());
        assert!(matches!(lib.get("nope"), Err(Error::UnknownObjectId(_))));
    }
}
