//! Synthetic depth, segmentation and color images from a pinhole camera.
//!
//! Depth is z-depth along the camera axis in metres with 0 for rays that hit
//! nothing. The ground is the infinite plane z = 0 and gets segmentation index
//! `instances.len()`; background is −1.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{any_perpendicular, PosedMesh, Pose};
use crate::objectlib::ObjectLibrary;
use crate::raster::encode_png;
use crate::rng::seeded;
use crate::scene::Scene;
use crate::textfmt::{from_yaml, pose_to_floats, sig9, to_yaml};

/// Metres per unit in `depth.png`.
pub const DEPTH_PNG_SCALE: f64 = 1e-4;
pub const GROUND_COLOR: [u8; 3] = [170, 170, 170];
pub const PALETTE: [[u8; 3]; 10] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [0, 128, 128],
];

/// Unit vector towards the light, scene frame.
pub fn light_direction() -> Vector3<f64> {
    Vector3::new(0.3, 0.2, 1.0).normalize()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Camera-to-scene; the camera looks along its +z with +y down the image.
    pub pose: Pose,
}

impl PinholeCamera {
    /// Intrinsics with the principal point at the image centre.
    pub fn centred(width: u32, height: u32, fov_x_deg: f64, pose: Pose) -> PinholeCamera {
        let f = width as f64 / 2.0 / (fov_x_deg.to_radians() / 2.0).tan();
        PinholeCamera { fx: f, fy: f, cx: width as f64 / 2.0, cy: height as f64 / 2.0, width, height, pose }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return Err(Error::invalid("camera", "focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera", "image must be at least 1x1"));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::invalid("camera", "principal point must lie inside the image"));
        }
        Ok(())
    }

    /// Ray through the centre of pixel `(u, v)`. The direction has unit
    /// camera-z component, so the ray parameter equals z-depth.
    pub fn pixel_ray(&self, u: u32, v: u32) -> (Point3<f64>, Vector3<f64>) {
        let d = Vector3::new((u as f64 + 0.5 - self.cx) / self.fx, (v as f64 + 0.5 - self.cy) / self.fy, 1.0);
        (Point3::from(self.pose.translation()), self.pose.transform_vector(&d))
    }

    /// Scene point seen at continuous pixel position `(u, v)` with z-depth `depth`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Point3<f64> {
        let p = Point3::new((u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth);
        self.pose.transform_point(&p)
    }

    /// Continuous pixel position and z-depth of a scene point.
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64, f64) {
        let c = self.pose.inverse().transform_point(p);
        (self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy, c.z)
    }
}

/// Camera pose at `eye` looking at `target`, image rows running downwards
/// (camera +y has negative scene-z component when possible).
pub fn look_at(eye: Point3<f64>, target: Point3<f64>) -> Result<Pose> {
    let Some(z) = (target - eye).try_normalize(1e-12) else {
        return Err(Error::invalid("camera", "eye and target coincide"));
    };
    let x = z.cross(&Vector3::z()).try_normalize(1e-9).unwrap_or_else(|| any_perpendicular(&z));
    let y = z.cross(&x);
    let r = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    Ok(Pose::new(UnitQuaternion::from_rotation_matrix(&r), eye.coords))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub width: u32,
    pub height: u32,
    /// Row-major, metres.
    pub depth: Vec<f64>,
    pub segmentation: Vec<i32>,
    pub color: Vec<[u8; 3]>,
    pub ground_index: i32,
}

impl RenderOutput {
    fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    pub fn depth_at(&self, u: u32, v: u32) -> f64 {
        self.depth[self.index(u, v)]
    }

    pub fn segment_at(&self, u: u32, v: u32) -> i32 {
        self.segmentation[self.index(u, v)]
    }

    /// `depth > 0` exactly where `segmentation >= 0`.
    pub fn is_consistent(&self) -> bool {
        self.depth.iter().zip(&self.segmentation).all(|(&d, &s)| (d > 0.0) == (s >= 0))
    }

    /// 16-bit gray, [`DEPTH_PNG_SCALE`] metres per unit, saturating.
    pub fn depth_png(&self) -> Result<Vec<u8>> {
        let data: Vec<u8> = self
            .depth
            .iter()
            .flat_map(|&d| ((d / DEPTH_PNG_SCALE).round().clamp(0.0, 65535.0) as u16).to_be_bytes())
            .collect();
        encode_png(self.width as usize, self.height as usize, png::ColorType::Grayscale, png::BitDepth::Sixteen, &data)
    }

    /// 8-bit gray holding `segmentation + 1`, so background is 0.
    pub fn segmentation_png(&self) -> Result<Vec<u8>> {
        if self.ground_index > 254 {
            return Err(Error::invalid("scene", "8-bit segmentation holds at most 254 instances"));
        }
        let data: Vec<u8> = self.segmentation.iter().map(|&s| (s + 1) as u8).collect();
        encode_png(self.width as usize, self.height as usize, png::ColorType::Grayscale, png::BitDepth::Eight, &data)
    }

    pub fn color_png(&self) -> Result<Vec<u8>> {
        let data: Vec<u8> = self.color.iter().flatten().copied().collect();
        encode_png(self.width as usize, self.height as usize, png::ColorType::Rgb, png::BitDepth::Eight, &data)
    }

    /// Writes `depth.png`, `seg.png`, `rgb.png` and `camera.yaml` into `dir`.
    pub fn write_view(&self, camera: &PinholeCamera, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files: [(&str, Vec<u8>); 4] = [
            ("depth.png", self.depth_png()?),
            ("seg.png", self.segmentation_png()?),
            ("rgb.png", self.color_png()?),
            ("camera.yaml", camera_to_yaml(camera).into_bytes()),
        ];
        let mut out = Vec::new();
        for (name, bytes) in files {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            out.push(path);
        }
        Ok(out)
    }
}

struct Hit {
    t: f64,
    segment: i32,
    normal: Vector3<f64>,
}

fn trace(posed: &[PosedMesh], origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, m) in posed.iter().enumerate() {
        let limit = best.as_ref().map_or(f64::INFINITY, |b| b.t);
        if let Some(h) = m.bvh.raycast(origin, dir, 0.0, limit) {
            if best.as_ref().is_none_or(|b| h.distance < b.t) {
                best = Some(Hit { t: h.distance, segment: i as i32, normal: h.normal });
            }
        }
    }
    if dir.z != 0.0 {
        let t = -origin.z / dir.z;
        if t > 0.0 && best.as_ref().is_none_or(|b| t < b.t) {
            best = Some(Hit { t, segment: posed.len() as i32, normal: Vector3::z() });
        }
    }
    best
}

fn shade(base: [u8; 3], normal: &Vector3<f64>) -> [u8; 3] {
    let k = normal.dot(&light_direction()).max(0.0);
    base.map(|c| (c as f64 * k).round() as u8)
}

pub fn render_scene(scene: &Scene, library: &ObjectLibrary, camera: &PinholeCamera) -> Result<RenderOutput> {
    camera.validate()?;
    let posed = scene.posed_meshes(library)?;
    let ground_index = posed.len() as i32;
    let (w, h) = (camera.width, camera.height);
    let rows: Vec<Vec<(f64, i32, [u8; 3])>> = (0..h)
        .into_par_iter()
        .map(|v| {
            (0..w)
                .map(|u| {
                    let (o, d) = camera.pixel_ray(u, v);
                    match trace(&posed, &o, &d) {
                        Some(hit) if hit.t > 0.0 => {
                            let base = if hit.segment == ground_index {
                                GROUND_COLOR
                            } else {
                                PALETTE[hit.segment as usize % PALETTE.len()]
                            };
                            (hit.t, hit.segment, shade(base, &hit.normal))
                        }
                        _ => (0.0, -1, [0, 0, 0]),
                    }
                })
                .collect()
        })
        .collect();
    let n = (w * h) as usize;
    let mut out = RenderOutput {
        width: w,
        height: h,
        depth: Vec::with_capacity(n),
        segmentation: Vec::with_capacity(n),
        color: Vec::with_capacity(n),
        ground_index,
    };
    for (d, s, c) in rows.into_iter().flatten() {
        out.depth.push(d);
        out.segmentation.push(s);
        out.color.push(c);
    }
    Ok(out)
}

/// Look-at poses aimed at the centre of the ground area from positions
/// uniform in volume over the spherical shell sector.
pub fn sample_camera_poses(
    scene: &Scene,
    count: usize,
    radius_m: [f64; 2],
    elevation_deg: [f64; 2],
    seed: u64,
) -> Result<Vec<Pose>> {
    let [r0, r1] = radius_m;
    if !(r0.is_finite() && r1.is_finite() && 0.0 < r0 && r0 <= r1) {
        return Err(Error::invalid("radius", format!("need 0 < min <= max, got [{r0}, {r1}]")));
    }
    let [e0, e1] = elevation_deg;
    if !(-90.0..=90.0).contains(&e0) || !(-90.0..=90.0).contains(&e1) || e0 > e1 {
        return Err(Error::invalid("elevation", format!("need -90 <= min <= max <= 90, got [{e0}, {e1}]")));
    }
    let target = Point3::new(scene.ground_area[0] / 2.0, scene.ground_area[1] / 2.0, 0.0);
    let (s0, s1) = (e0.to_radians().sin(), e1.to_radians().sin());
    let mut rng = seeded(seed);
    let mut poses = Vec::with_capacity(count);
    for _ in 0..count {
        let a: f64 = rng.random();
        let b: f64 = rng.random();
        let c: f64 = rng.random();
        let r = (r0.powi(3) + a * (r1.powi(3) - r0.powi(3))).cbrt();
        let sin_el = s0 + b * (s1 - s0);
        let cos_el = (1.0 - sin_el * sin_el).max(0.0).sqrt();
        let az = c * std::f64::consts::TAU;
        let eye = target + r * Vector3::new(cos_el * az.cos(), cos_el * az.sin(), sin_el);
        poses.push(look_at(eye, target)?);
    }
    Ok(poses)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraDocument {
    version: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    /// Camera-to-scene, row-major 4x4.
    pose: Vec<f64>,
    depth_png_scale_m: f64,
}

pub fn camera_to_yaml(camera: &PinholeCamera) -> String {
    to_yaml(&CameraDocument {
        version: 1,
        fx: sig9(camera.fx),
        fy: sig9(camera.fy),
        cx: sig9(camera.cx),
        cy: sig9(camera.cy),
        width: camera.width,
        height: camera.height,
        pose: pose_to_floats(&camera.pose),
        depth_png_scale_m: DEPTH_PNG_SCALE,
    })
}

pub fn parse_camera_yaml(text: &str) -> Result<PinholeCamera> {
    let doc: CameraDocument = from_yaml(text)?;
    if doc.version != 1 {
        return Err(Error::schema("version", format!("unsupported version {}", doc.version)));
    }
    let pose = Pose::from_row_major(&doc.pose).map_err(|e| match e {
        Error::SchemaViolation { message, .. } => Error::schema("pose", message),
        other => other,
    })?;
    let cam = PinholeCamera { fx: doc.fx, fy: doc.fy, cx: doc.cx, cy: doc.cy, width: doc.width, height: doc.height, pose };
    cam.validate()?;
    Ok(cam)
}
