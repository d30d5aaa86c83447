use nalgebra::Point2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::PosedMesh;
use crate::objectlib::ObjectLibrary;
use crate::raster::GrayImage;
use crate::scene::{statuses, InstanceStatus, Scene};

pub const DEFAULT_DPI: f64 = 300.0;

/// Top-down height map of a scene's ground area. Column 0 is at x = 0 and
/// the bottom row at y = 0, so the scene origin is the raster's lower-left
/// corner.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMapImage {
    pub image: GrayImage,
    pub dpi: f64,
}

impl HeightMapImage {
    pub fn mm_per_pixel(&self) -> f64 {
        25.4 / self.dpi
    }

    /// Scene origin in pixel coordinates (column, row), at a pixel corner.
    pub fn origin_px(&self) -> [f64; 2] {
        [0.0, self.image.height as f64]
    }

    /// Scene-frame position (mm) of the centre of pixel `(col, row)`.
    pub fn pixel_centre_mm(&self, col: usize, row: usize) -> [f64; 2] {
        pixel_centre_mm(col, row, self.image.height, self.mm_per_pixel())
    }
}

pub(crate) fn pixel_centre_mm(col: usize, row: usize, height: usize, mpp: f64) -> [f64; 2] {
    [(col as f64 + 0.5) * mpp, (height as f64 - row as f64 - 0.5) * mpp]
}

pub(crate) fn raster_size(area_mm: [f64; 2], mpp: f64) -> (usize, usize) {
    let n = |l: f64| ((l / mpp) - 1e-9).ceil().max(1.0) as usize;
    (n(area_mm[0]), n(area_mm[1]))
}

pub(crate) fn check_dpi(dpi: f64) -> Result<()> {
    if !(dpi.is_finite() && dpi > 0.0) {
        return Err(Error::invalid("dpi", format!("must be positive, got {dpi}")));
    }
    Ok(())
}

struct Flat {
    v: [Point2<f64>; 3],
    lo: [f64; 2],
    hi: [f64; 2],
    gray: u8,
}

/// Gray level of a triangle with mean height `h_avg` when the tallest point
/// of the scene is at `h_max`.
pub fn gray_level(h_avg: f64, h_max: f64) -> u8 {
    if h_max <= 0.0 {
        return 0;
    }
    (255.0 * h_avg / h_max).round().clamp(0.0, 255.0) as u8
}

/// Projects every triangle onto the ground; each pixel keeps the darkest
/// (lowest) triangle covering its centre.
pub fn render_heightmap(scene: &Scene, library: &ObjectLibrary, dpi: f64) -> Result<HeightMapImage> {
    check_dpi(dpi)?;
    if scene.instances.is_empty() {
        return Err(Error::EmptyScene);
    }
    let posed = scene.posed_meshes(library)?;
    if let Some(i) = statuses(&posed, scene.ground_area).iter().position(|s| *s == InstanceStatus::OutOfBounds) {
        return Err(Error::invalid("scene", format!("instance {i} is out of bounds")));
    }
    let image = rasterize(&posed, [scene.ground_area[0] * 1e3, scene.ground_area[1] * 1e3], 25.4 / dpi);
    Ok(HeightMapImage { image, dpi })
}

pub(crate) fn rasterize(posed: &[PosedMesh], area_mm: [f64; 2], mpp: f64) -> GrayImage {
    let h_max = posed.iter().flat_map(|m| m.mesh.vertices()).map(|v| v.z).fold(0.0, f64::max);
    let mut flats = Vec::new();
    for m in posed {
        for i in 0..m.mesh.triangles().len() {
            let t = m.mesh.triangle(i);
            let v = t.map(|p| Point2::new(p.x * 1e3, p.y * 1e3));
            let area = (v[1] - v[0]).perp(&(v[2] - v[0]));
            if area.abs() < 1e-12 {
                continue;
            }
            let h_avg = (t[0].z + t[1].z + t[2].z) / 3.0;
            let lo = [v[0].x.min(v[1].x).min(v[2].x), v[0].y.min(v[1].y).min(v[2].y)];
            let hi = [v[0].x.max(v[1].x).max(v[2].x), v[0].y.max(v[1].y).max(v[2].y)];
            flats.push(Flat { v, lo, hi, gray: gray_level(h_avg, h_max) });
        }
    }

    let (w, h) = raster_size(area_mm, mpp);
    let mut img = GrayImage::filled(w, h, 255);
    img.pixels.par_chunks_mut(w).enumerate().for_each(|(row, line)| {
        let y = (h as f64 - row as f64 - 0.5) * mpp;
        for f in flats.iter().filter(|f| f.lo[1] <= y && y <= f.hi[1]) {
            let c0 = (f.lo[0] / mpp - 0.5).ceil().max(0.0) as usize;
            let c1 = ((f.hi[0] / mpp - 0.5).floor().max(-1.0) + 1.0) as usize;
            for (col, px) in line.iter_mut().enumerate().take(c1.min(w)).skip(c0) {
                if f.gray < *px && inside(&f.v, Point2::new((col as f64 + 0.5) * mpp, y)) {
                    *px = f.gray;
                }
            }
        }
    });
    img
}

/// Closed point-in-triangle test for either winding.
fn inside(v: &[Point2<f64>; 3], p: Point2<f64>) -> bool {
    let e = |a: Point2<f64>, b: Point2<f64>| (b - a).perp(&(p - a));
    let (d0, d1, d2) = (e(v[0], v[1]), e(v[1], v[2]), e(v[2], v[0]));
    let tol = 1e-9;
    (d0 >= -tol && d1 >= -tol && d2 >= -tol) || (d0 <= tol && d1 <= tol && d2 <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::tests::{cube_at, desk_library};
    use crate::scene::ObjectInstance;
    use crate::geom::Pose;
    use nalgebra::Vector3;

    fn scene_of(instances: Vec<ObjectInstance>) -> Scene {
        let mut s = Scene::new([0.2, 0.15], "lib.yaml").unwrap();
        s.instances = instances;
        s
    }

    /// Lengths of dark runs along the middle row and column.
    fn footprint_px(img: &GrayImage, dark: u8) -> (usize, usize) {
        let row = img.height / 2;
        let col = img.width / 2;
        let across = (0..img.width).filter(|&c| img.get(c, row) <= dark).count();
        let down = (0..img.height).filter(|&r| img.get(col, r) <= dark).count();
        (across, down)
    }

    #[test]
    fn cube_footprint_scale() {
        let lib = desk_library();
        let scene = scene_of(vec![cube_at(0.1, 0.075)]);
        for dpi in [72.0, 150.0, 300.0] {
            let hm = render_heightmap(&scene, &lib, dpi).unwrap();
            assert_eq!(hm.mm_per_pixel(), 25.4 / dpi);
            let expect = 50.0 * dpi / 25.4;
            let (a, d) = footprint_px(&hm.image, 0);
            assert!((a as f64 - expect).abs() <= 1.0, "{dpi}: {a} vs {expect}");
            assert!((d as f64 - expect).abs() <= 1.0, "{dpi}: {d} vs {expect}");
            assert_eq!(hm.image.get(0, 0), 255);
            let centre = hm.image.get(hm.image.width / 2, hm.image.height / 2);
            assert_eq!(centre, 0);
        }
    }

    #[test]
    fn stacked_cubes_keep_lower_footprint() {
        let lib = desk_library();
        // 5 cm cube on the floor, a second one resting on it shifted by 2 cm
        let low = cube_at(0.08, 0.075);
        let high = ObjectInstance::new("cube", Pose::from_translation(Vector3::new(0.1, 0.075, 0.075)));
        let scene = scene_of(vec![low.clone(), high.clone()]);
        let hm = render_heightmap(&scene, &lib, 200.0).unwrap();
        let only_high = {
            let mut s = scene_of(vec![high]);
            s.ground_area = scene.ground_area;
            s
        };
        let posed = only_high.posed_meshes(&lib).unwrap();
        let alone = rasterize(&posed, [200.0, 150.0], hm.mm_per_pixel());
        let mut overlap = 0;
        for row in 0..hm.image.height {
            for col in 0..hm.image.width {
                let [x, y] = hm.pixel_centre_mm(col, row);
                let in_low = (x - 80.0).abs() < 24.0 && (y - 75.0).abs() < 24.0;
                if in_low {
                    assert_eq!(hm.image.get(col, row), 0, "low footprint hidden at {x},{y}");
                    if alone.get(col, row) < 255 {
                        overlap += 1;
                    }
                }
            }
        }
        assert!(overlap > 1000, "{overlap}");
        // the upper cube's exposed part shows its bottom face at mid height
        let [col, row] = [(115.0 / hm.mm_per_pixel()) as usize, hm.image.height / 2];
        // 127.5 sits on a rounding edge
        assert!(hm.image.get(col, row).abs_diff(gray_level(0.05, 0.1)) <= 1);
    }

    #[test]
    fn errors() {
        let lib = desk_library();
        assert!(matches!(render_heightmap(&scene_of(vec![]), &lib, 300.0), Err(Error::EmptyScene)));
        let out = scene_of(vec![cube_at(0.19, 0.075)]);
        assert!(render_heightmap(&out, &lib, 300.0).is_err());
        assert!(render_heightmap(&scene_of(vec![cube_at(0.1, 0.075)]), &lib, 0.0).is_err());
    }

    #[test]
    fn gray_is_monotone_in_height() {
        let mut last = 0;
        for k in 0..=1000 {
            let g = gray_level(k as f64 * 1e-4, 0.1);
            assert!(g >= last);
            last = g;
        }
        assert_eq!(gray_level(0.1, 0.1), 255);
    }
}
