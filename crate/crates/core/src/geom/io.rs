//! OBJ and STL readers, binary STL writer.

use std::path::Path;

use nalgebra::Point3;

use super::mesh::TriMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Stl,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<MeshFormat> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("stl") => Ok(MeshFormat::Stl),
            other => Err(Error::UnsupportedFormat(
                other.map_or_else(|| path.display().to_string(), |e| format!(".{e}")),
            )),
        }
    }
}

/// Loads an OBJ or STL file and multiplies every coordinate by `scale`.
pub fn load_mesh(path: impl AsRef<Path>, scale: f64) -> Result<TriMesh> {
    let path = path.as_ref();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
    }
    let format = MeshFormat::from_path(path)?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mesh = match format {
        MeshFormat::Obj => parse_obj(&bytes)?,
        MeshFormat::Stl => parse_stl(&bytes)?,
    };
    Ok(if scale == 1.0 { mesh } else { mesh.scaled(scale) })
}

/// Parses Wavefront OBJ `v` and `f` records. Polygons are fan-triangulated;
/// negative (relative) indices are supported; everything else is ignored.
pub fn parse_obj(bytes: &[u8]) -> Result<TriMesh> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::MalformedMesh(format!("OBJ is not UTF-8: {e}")))?;
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut c = [0.0f64; 3];
                for slot in &mut c {
                    let tok = fields.next().ok_or_else(|| {
                        Error::MalformedMesh(format!("line {}: vertex needs 3 coordinates", lineno + 1))
                    })?;
                    *slot = tok.parse().map_err(|_| {
                        Error::MalformedMesh(format!("line {}: bad coordinate `{tok}`", lineno + 1))
                    })?;
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in fields {
                    let idx = tok.split('/').next().unwrap_or("");
                    let i: i64 = idx.parse().map_err(|_| {
                        Error::MalformedMesh(format!("line {}: bad face index `{tok}`", lineno + 1))
                    })?;
                    let n = vertices.len() as i64;
                    let resolved = match i {
                        0 => -1,
                        i if i > 0 => i - 1,
                        i => n + i,
                    };
                    if resolved < 0 || resolved > u32::MAX as i64 {
                        return Err(Error::MalformedMesh(format!(
                            "line {}: face index {i} is invalid",
                            lineno + 1
                        )));
                    }
                    poly.push(resolved as u32);
                }
                if poly.len() < 3 {
                    return Err(Error::MalformedMesh(format!(
                        "line {}: face needs at least 3 vertices",
                        lineno + 1
                    )));
                }
                for k in 1..poly.len() - 1 {
                    triangles.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Parses binary or ASCII STL. A file whose length equals `84 + 50 * n`
/// for the facet count `n` in its header is read as binary.
pub fn parse_stl(bytes: &[u8]) -> Result<TriMesh> {
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as u64;
        if 84 + 50 * n == bytes.len() as u64 {
            return parse_stl_binary(&bytes[84..], n as usize);
        }
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::MalformedMesh("STL is neither binary nor ASCII".into()))?;
    parse_stl_ascii(text)
}

fn parse_stl_binary(body: &[u8], n: usize) -> Result<TriMesh> {
    let mut soup = Vec::with_capacity(n);
    for facet in body.chunks_exact(50) {
        let f = |k: usize| {
            let o = 12 + 4 * k;
            f32::from_le_bytes([facet[o], facet[o + 1], facet[o + 2], facet[o + 3]]) as f64
        };
        soup.push([
            Point3::new(f(0), f(1), f(2)),
            Point3::new(f(3), f(4), f(5)),
            Point3::new(f(6), f(7), f(8)),
        ]);
    }
    TriMesh::from_triangle_soup(soup)
}

fn parse_stl_ascii(text: &str) -> Result<TriMesh> {
    let mut tokens = text.split_whitespace();
    if tokens.next() != Some("solid") {
        return Err(Error::MalformedMesh("ASCII STL must start with `solid`".into()));
    }
    let mut soup = Vec::new();
    let mut current: Vec<Point3<f64>> = Vec::new();
    let mut in_loop = false;
    while let Some(tok) = tokens.next() {
        match tok {
            "outer" => {
                in_loop = true;
                current.clear();
            }
            "vertex" => {
                if !in_loop {
                    return Err(Error::MalformedMesh("vertex outside of a loop".into()));
                }
                let mut c = [0.0f64; 3];
                for slot in &mut c {
                    let t = tokens
                        .next()
                        .ok_or_else(|| Error::MalformedMesh("truncated vertex".into()))?;
                    *slot = t
                        .parse()
                        .map_err(|_| Error::MalformedMesh(format!("bad coordinate `{t}`")))?;
                }
                current.push(Point3::new(c[0], c[1], c[2]));
            }
            "endloop" => {
                if current.len() != 3 {
                    return Err(Error::MalformedMesh(format!(
                        "facet loop has {} vertices, expected 3",
                        current.len()
                    )));
                }
                soup.push([current[0], current[1], current[2]]);
                in_loop = false;
            }
            _ => {}
        }
    }
    if in_loop {
        return Err(Error::MalformedMesh("unterminated facet loop".into()));
    }
    TriMesh::from_triangle_soup(soup)
}

/// Binary STL (little-endian, f32 coordinates, zero attribute bytes).
pub fn write_stl_binary(mesh: &TriMesh) -> Vec<u8> {
    let n = mesh.triangles().len();
    let mut out = Vec::with_capacity(84 + 50 * n);
    let mut header = [0u8; 80];
    let tag = b"binary STL";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for i in 0..n {
        let normal = mesh.triangle_normal(i);
        for c in normal.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for p in mesh.triangle(i) {
            for c in p.coords.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

pub fn write_obj(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for v in mesh.vertices() {
        s.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for t in mesh.triangles() {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    pub(crate) const UNIT_CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 0 1 0
v 1 1 0
v 0 0 1
v 1 0 1
v 0 1 1
v 1 1 1
f 1 3 4 2
f 5 6 8 7
f 1 2 6 5
f 3 7 8 4
f 1 5 7 3
f 2 4 8 6
";

    #[test]
    fn unit_cube_obj() {
        let m = parse_obj(UNIT_CUBE_OBJ.as_bytes()).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.triangles().len(), 12);
        assert!(m.check_watertight().is_ok());
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn scaled_cube_extents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        std::fs::write(&p, UNIT_CUBE_OBJ).unwrap();
        let m = load_mesh(&p, 0.05).unwrap();
        let e = m.aabb().extents();
        assert!((e - Vector3::repeat(0.05)).abs().max() < 1e-15);
    }

    #[test]
    fn out_of_range_face_index() {
        let bad = UNIT_CUBE_OBJ.replace("f 2 4 8 6", "f 2 4 9 6");
        assert!(matches!(parse_obj(bad.as_bytes()), Err(Error::MalformedMesh(_))));
    }

    #[test]
    fn obj_slash_and_negative_indices() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf -3/1/1 -2//1 -1\n";
        let m = parse_obj(src.as_bytes()).unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
        assert!(parse_obj(b"v 0 0 0\nf 0 1 2\n").is_err());
        assert!(parse_obj(b"v 0 0\n").is_err());
    }

    #[test]
    fn stl_binary_round_trip() {
        let cube = parse_obj(UNIT_CUBE_OBJ.as_bytes()).unwrap();
        let bytes = write_stl_binary(&cube);
        assert_eq!(bytes.len(), 84 + 50 * 12);
        let back = parse_stl(&bytes).unwrap();
        assert_eq!(back.vertices().len(), 8);
        assert_eq!(back.triangles().len(), 12);
        assert!((back.signed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stl_ascii() {
        let src = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n";
        let m = parse_stl(src.as_bytes()).unwrap();
        assert_eq!(m.triangles().len(), 1);
        assert!(parse_stl(b"solid x\nouter loop\nvertex 0 0 0\nendloop\n").is_err());
        assert!(parse_stl(b"garbage").is_err());
    }

    #[test]
    fn format_and_missing_file() {
        assert!(matches!(load_mesh("x.ply", 1.0), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(load_mesh("/nonexistent/x.obj", 1.0), Err(Error::FileNotFound(_))));
        assert!(matches!(load_mesh("x.obj", -1.0), Err(Error::InvalidParameter { .. })));
    }
}
