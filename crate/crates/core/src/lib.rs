//! Toolkit for tabletop grasping experiments: object libraries with stable
//! resting poses, scene composition and validation, antipodal grasp sampling,
//! quasi-static grasp evaluation, sim-vs-real statistics, printable placement
//! sheets and synthetic image rendering.

pub mod error;
pub mod geom;
pub mod hull;
pub mod lp;
pub mod rng;

pub use error::{Error, Result};
pub mod objectlib;
pub mod textfmt;
pub mod printout;
pub mod raster;
pub mod render;
pub mod scene;
pub mod graspgen;
pub mod graspeval;
pub mod analytics;
