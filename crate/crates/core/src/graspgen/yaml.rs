//! Grasp-set YAML: version, object id, generation parameters and grasps.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{Contact, Grasp, GraspSet, SamplingParams};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::textfmt::{from_yaml, pose_to_floats, sig9, to_yaml};

pub const GRASP_SET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspSetDocument {
    pub version: u32,
    pub object_id: String,
    pub friction: f64,
    pub params: SamplingParams,
    #[serde(default)]
    pub grasps: Vec<GraspEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspEntry {
    pub pose: Vec<f64>,
    pub width: f64,
    pub contacts: [ContactEntry; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactEntry {
    pub point: [f64; 3],
    /// Inward unit normal.
    pub normal: [f64; 3],
}

impl GraspSetDocument {
    pub fn from_set(set: &GraspSet) -> GraspSetDocument {
        let c = |c: &Contact| ContactEntry {
            point: [c.point.x, c.point.y, c.point.z].map(sig9),
            normal: [c.normal.x, c.normal.y, c.normal.z].map(sig9),
        };
        GraspSetDocument {
            version: GRASP_SET_VERSION,
            object_id: set.object_id.clone(),
            friction: sig9(set.friction),
            params: set.params,
            grasps: set
                .grasps
                .iter()
                .map(|g| GraspEntry {
                    pose: pose_to_floats(&g.pose),
                    width: sig9(g.width),
                    contacts: [c(&g.contacts[0]), c(&g.contacts[1])],
                })
                .collect(),
        }
    }

    pub fn into_set(self) -> Result<GraspSet> {
        let doc = check(self)?;
        let grasps = doc
            .grasps
            .iter()
            .map(|g| {
                let c = |c: &ContactEntry| Contact {
                    point: Point3::from(c.point),
                    normal: Vector3::from(c.normal).normalize(),
                };
                Ok(Grasp {
                    pose: Pose::from_row_major(&g.pose)?,
                    width: g.width,
                    contacts: [c(&g.contacts[0]), c(&g.contacts[1])],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GraspSet {
            object_id: doc.object_id,
            friction: doc.friction,
            params: doc.params,
            grasps,
        })
    }
}

fn check(doc: GraspSetDocument) -> Result<GraspSetDocument> {
    if doc.version != GRASP_SET_VERSION {
        return Err(Error::schema(
            "version",
            format!("unsupported version {}, expected {GRASP_SET_VERSION}", doc.version),
        ));
    }
    if !(doc.friction.is_finite() && doc.friction >= 0.0) {
        return Err(Error::schema("friction", "must be a non-negative number"));
    }
    for (i, g) in doc.grasps.iter().enumerate() {
        Pose::from_row_major(&g.pose).map_err(|e| match e {
            Error::SchemaViolation { message, .. } => Error::schema(format!("grasps[{i}].pose"), message),
            other => other,
        })?;
        if !(g.width.is_finite() && g.width >= 0.0) {
            return Err(Error::schema(format!("grasps[{i}].width"), "must be non-negative"));
        }
        for (k, c) in g.contacts.iter().enumerate() {
            let finite = c.point.iter().chain(&c.normal).all(|v| v.is_finite());
            let norm = Vector3::from(c.normal).norm();
            if !finite || (norm - 1.0).abs() > 1e-6 {
                return Err(Error::schema(
                    format!("grasps[{i}].contacts[{k}]"),
                    "point must be finite and normal unit length",
                ));
            }
        }
    }
    Ok(doc)
}

pub fn parse_grasp_set_yaml(text: &str) -> Result<GraspSetDocument> {
    check(from_yaml(text)?)
}

pub fn save_grasp_set(set: &GraspSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_yaml(&GraspSetDocument::from_set(set))).map_err(|e| Error::io(path, e))
}

pub fn load_grasp_set(path: impl AsRef<Path>) -> Result<GraspSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_grasp_set_yaml(&text)?.into_set()
}
