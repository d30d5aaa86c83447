//! Shared helpers for the YAML/JSON file formats.

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};
use crate::geom::Pose;

/// Rounds to 9 significant decimal digits, the precision of every float
/// written to a toolkit file.
pub fn sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x + 0.0;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Row-major pose entries at 9 significant digits, with round-off below 1e-12 cleared.
pub fn pose_to_floats(pose: &Pose) -> Vec<f64> {
    pose.to_row_major()
        .iter()
        .map(|&v| if v.abs() < 1e-12 { 0.0 } else { sig9(v) })
        .collect()
}

/// Deserialises YAML, reporting schema errors with the offending field path.
pub fn from_yaml<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = serde_yaml::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(path, e.into_inner().to_string())
    })
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(path, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| Error::schema(".", e.to_string()))?;
    Ok(value)
}

pub fn to_yaml<T: serde::Serialize>(value: &T) -> String {
    serde_yaml::to_string(value).expect("toolkit documents always serialise")
}
