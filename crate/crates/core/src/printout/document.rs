use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use flate2::write::ZlibEncoder;
use flate2::Compression;
use rayon::prelude::*;

use super::board::MarkerDictionary;
use super::heightmap::{check_dpi, pixel_centre_mm, render_heightmap, DEFAULT_DPI};
use crate::error::{Error, Result};
use crate::objectlib::ObjectLibrary;
use crate::raster::GrayImage;
use crate::scene::Scene;

pub const DEFAULT_OVERLAP_MM: f64 = 10.0;
pub const MIN_PAGE_MM: f64 = 100.0;
const PT_PER_MM: f64 = 72.0 / 25.4;
const CROP_MARK_MM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrintoutOptions {
    /// Page width and height; the other orientation is used when it needs
    /// fewer pages.
    pub page_mm: [f64; 2],
    pub dpi: f64,
    /// Largest overlap between neighbouring pages.
    pub overlap_mm: f64,
}

impl Default for PrintoutOptions {
    fn default() -> Self {
        PrintoutOptions { page_mm: [210.0, 297.0], dpi: DEFAULT_DPI, overlap_mm: DEFAULT_OVERLAP_MM }
    }
}

/// Full-size printable sheet covering the ground area.
#[derive(Debug, Clone, PartialEq)]
pub struct Sheet {
    pub image: GrayImage,
    pub dpi: f64,
    pub size_mm: [f64; 2],
    pub warnings: Vec<String>,
}

/// Height map over the marker board; projections are clipped to the
/// board's object area.
pub fn compose_sheet(scene: &Scene, library: &ObjectLibrary, dpi: f64, dictionary_dir: &Path) -> Result<Sheet> {
    let hm = render_heightmap(scene, library, dpi)?;
    let size_mm = [scene.ground_area[0] * 1e3, scene.ground_area[1] * 1e3];
    let mpp = hm.mm_per_pixel();
    let mut image = hm.image;
    let mut warnings = Vec::new();
    if let Some(spec) = &scene.board {
        let dict = MarkerDictionary::resolve(&spec.dictionary, dictionary_dir)?;
        let [ox, oy] = spec.origin_mm;
        if !(0.0..size_mm[0]).contains(&ox) || !(0.0..size_mm[1]).contains(&oy) {
            return Err(Error::BoardOverflow(format!("board origin ({ox}, {oy}) mm lies outside the ground area")));
        }
        let layout = spec.layout([size_mm[0] - ox, size_mm[1] - oy], &dict)?;
        let posed = scene.posed_meshes(library)?;
        let [x0, y0, x1, y1] = layout.object_area_mm;
        for (i, m) in posed.iter().enumerate() {
            let (lo, hi) = (m.aabb.min * 1e3, m.aabb.max * 1e3);
            if lo.x - ox < x0 || lo.y - oy < y0 || hi.x - ox > x1 || hi.y - oy > y1 {
                warnings.push(format!(
                    "instance {i} ({}) reaches into the marker band; its projection is clipped",
                    scene.instances[i].object_id
                ));
            }
        }
        let (w, h) = (image.width, image.height);
        image.pixels.par_chunks_mut(w).enumerate().for_each(|(row, line)| {
            for (col, px) in line.iter_mut().enumerate() {
                let [x, y] = pixel_centre_mm(col, row, h, mpp);
                let (bx, by) = (x - ox, y - oy);
                *px = match layout.sample(&dict, bx, by) {
                    Some(white) => {
                        if white {
                            255
                        } else {
                            0
                        }
                    }
                    None if layout.in_object_area(bx, by) => *px,
                    None => 255,
                };
            }
        });
    }
    Ok(Sheet { image, dpi, size_mm, warnings })
}

/// Page grid along both axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TilePlan {
    /// Page size in the orientation used.
    pub page_mm: [f64; 2],
    /// Columns and rows of pages.
    pub grid: [usize; 2],
    pub overlap_mm: [f64; 2],
}

impl TilePlan {
    pub fn page_count(&self) -> usize {
        self.grid[0] * self.grid[1]
    }

    pub fn stride_mm(&self) -> [f64; 2] {
        [self.page_mm[0] - self.overlap_mm[0], self.page_mm[1] - self.overlap_mm[1]]
    }
}

/// `ceil(L / P)` pages per axis; neighbouring pages overlap by the spare
/// length shared out evenly, capped at `max_overlap`.
pub fn plan_tiles(sheet_mm: [f64; 2], page_mm: [f64; 2], max_overlap: f64) -> Result<TilePlan> {
    if page_mm[0] < MIN_PAGE_MM || page_mm[1] < MIN_PAGE_MM || !page_mm.iter().all(|v| v.is_finite()) {
        return Err(Error::PageTooSmall { width_mm: page_mm[0], height_mm: page_mm[1] });
    }
    if !(max_overlap.is_finite() && max_overlap >= 0.0) {
        return Err(Error::invalid("overlap_mm", "must be non-negative"));
    }
    let axis = |l: f64, p: f64| {
        let n = ((l / p) - 1e-9).ceil().max(1.0) as usize;
        let ov = if n == 1 { 0.0 } else { ((n as f64 * p - l) / (n as f64 - 1.0)).min(max_overlap) };
        (n, ov)
    };
    let plan = |page: [f64; 2]| {
        let (nx, ox) = axis(sheet_mm[0], page[0]);
        let (ny, oy) = axis(sheet_mm[1], page[1]);
        TilePlan { page_mm: page, grid: [nx, ny], overlap_mm: [ox, oy] }
    };
    let upright = plan(page_mm);
    let turned = plan([page_mm[1], page_mm[0]]);
    Ok(if turned.page_count() < upright.page_count() { turned } else { upright })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrintoutPage {
    /// 1-based, row-major from the top-left page.
    pub number: usize,
    pub col: usize,
    /// 0 is the top row of pages.
    pub row: usize,
    /// Scene-frame position (mm) of the page image's lower-left corner.
    pub offset_mm: [f64; 2],
    pub image: GrayImage,
    /// Sheet content on the page, `[x0, y0, x1, y1]` in page millimetres
    /// from the lower-left page corner.
    pub content_mm: [f64; 4],
}

impl PrintoutPage {
    /// Scene-frame position (mm) of the centre of page pixel `(col, row)`.
    pub fn pixel_to_scene_mm(&self, col: usize, row: usize, dpi: f64) -> [f64; 2] {
        let [x, y] = pixel_centre_mm(col, row, self.image.height, 25.4 / dpi);
        [self.offset_mm[0] + x, self.offset_mm[1] + y]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrintoutDocument {
    pub plan: TilePlan,
    pub dpi: f64,
    pub pages: Vec<PrintoutPage>,
    pub warnings: Vec<String>,
    pub pdf: Vec<u8>,
}

impl PrintoutDocument {
    /// Writes `printout.pdf` and `page_<n>.png` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let pdf = dir.join("printout.pdf");
        std::fs::write(&pdf, &self.pdf).map_err(|e| Error::io(&pdf, e))?;
        written.push(pdf);
        for p in &self.pages {
            let path = dir.join(format!("page_{}.png", p.number));
            std::fs::write(&path, p.image.to_png()?).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Cuts `sheet` into pages per `plan`, aligning page origins to whole pixels.
pub fn tile_sheet(sheet: &Sheet, plan: &TilePlan) -> Vec<PrintoutPage> {
    let mpp = 25.4 / sheet.dpi;
    let (sw, sh) = (sheet.image.width, sheet.image.height);
    let pw = (plan.page_mm[0] / mpp + 1e-9).floor() as usize;
    let ph = (plan.page_mm[1] / mpp + 1e-9).floor() as usize;
    let stride = plan.stride_mm();
    let [nx, ny] = plan.grid;
    let mut pages = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        let j = ny - 1 - row;
        for col in 0..nx {
            let x0 = (col as f64 * stride[0] / mpp).round() as usize;
            let y0 = (j as f64 * stride[1] / mpp).round() as usize;
            let mut image = GrayImage::filled(pw, ph, 255);
            for r in 0..ph {
                let from_bottom = y0 + (ph - 1 - r);
                if from_bottom >= sh {
                    continue;
                }
                let src_row = sh - 1 - from_bottom;
                for c in 0..pw.min(sw.saturating_sub(x0)) {
                    image.set(c, r, sheet.image.get(x0 + c, src_row));
                }
            }
            let cw = pw.min(sw.saturating_sub(x0)) as f64 * mpp;
            let chh = ph.min(sh.saturating_sub(y0)) as f64 * mpp;
            pages.push(PrintoutPage {
                number: row * nx + col + 1,
                col,
                row,
                offset_mm: [x0 as f64 * mpp, y0 as f64 * mpp],
                image,
                content_mm: [0.0, 0.0, cw, chh],
            });
        }
    }
    pages
}

/// Sheet of `scene` split over pages, with a PDF at exact physical scale.
pub fn compose_printout(
    scene: &Scene,
    library: &ObjectLibrary,
    options: &PrintoutOptions,
    dictionary_dir: &Path,
) -> Result<PrintoutDocument> {
    check_dpi(options.dpi)?;
    let sheet = compose_sheet(scene, library, options.dpi, dictionary_dir)?;
    let plan = plan_tiles(sheet.size_mm, options.page_mm, options.overlap_mm)?;
    let pages = tile_sheet(&sheet, &plan);
    let pdf = write_pdf(&pages, &plan, options.dpi)?;
    Ok(PrintoutDocument { plan, dpi: options.dpi, pages, warnings: sheet.warnings, pdf })
}

fn pt(mm: f64) -> String {
    format!("{:.4}", mm * PT_PER_MM)
}

fn page_content(page: &PrintoutPage, plan: &TilePlan, dpi: f64) -> String {
    let mpp = 25.4 / dpi;
    let (w_mm, h_mm) = (page.image.width as f64 * mpp, page.image.height as f64 * mpp);
    let mut s = String::new();
    let _ = writeln!(s, "q {} 0 0 {} 0 0 cm /Im0 Do Q", pt(w_mm), pt(h_mm));
    let [x0, y0, x1, y1] = page.content_mm;
    let _ = writeln!(s, "0 G 0.25 w");
    let l = CROP_MARK_MM;
    for (cx, cy, dx, dy) in [(x0, y0, l, l), (x1, y0, -l, l), (x1, y1, -l, -l), (x0, y1, l, -l)] {
        let _ = writeln!(s, "{} {} m {} {} l S", pt(cx + dx), pt(cy), pt(cx), pt(cy));
        let _ = writeln!(s, "{} {} m {} {} l S", pt(cx), pt(cy + dy), pt(cx), pt(cy));
    }
    let label = format!(
        "page {}/{}  row {} col {}",
        page.number,
        plan.page_count(),
        page.row + 1,
        page.col + 1
    );
    let _ = writeln!(s, "BT /F1 7 Tf 0 g {} {} Td ({label}) Tj ET", pt(x0 + l + 2.0), pt(y0 + 1.5));
    s
}

fn deflate(data: &[u8]) -> Result<Vec<u8>> {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
    let io = |e| Error::io("<pdf stream>", e);
    enc.write_all(data).map_err(io)?;
    enc.finish().map_err(io)
}

/// Minimal PDF: one page per tile, each holding one gray image and its
/// marks. Object 1 is the catalog, 2 the page tree, 3 the label font.
fn write_pdf(pages: &[PrintoutPage], plan: &TilePlan, dpi: f64) -> Result<Vec<u8>> {
    let mut out: Vec<u8> = b"%PDF-1.4\n%\xe2\xe3\xcf\xd3\n".to_vec();
    let mut offsets = Vec::new();
    let mut object = |out: &mut Vec<u8>, body: &[u8]| {
        offsets.push(out.len());
        out.extend_from_slice(format!("{} 0 obj\n", offsets.len()).as_bytes());
        out.extend_from_slice(body);
        out.extend_from_slice(b"\nendobj\n");
    };
    let first_page = 4;
    let kids: Vec<String> = (0..pages.len()).map(|k| format!("{} 0 R", first_page + 3 * k)).collect();
    object(&mut out, b"<< /Type /Catalog /Pages 2 0 R >>");
    object(&mut out, format!("<< /Type /Pages /Kids [{}] /Count {} >>", kids.join(" "), pages.len()).as_bytes());
    object(&mut out, b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica >>");
    let media = format!("[0 0 {} {}]", pt(plan.page_mm[0]), pt(plan.page_mm[1]));
    for (k, page) in pages.iter().enumerate() {
        let id = first_page + 3 * k;
        object(
            &mut out,
            format!(
                "<< /Type /Page /Parent 2 0 R /MediaBox {media} /Resources << /XObject << /Im0 {} 0 R >> /Font << /F1 3 0 R >> >> /Contents {} 0 R >>",
                id + 2,
                id + 1
            )
            .as_bytes(),
        );
        let content = page_content(page, plan, dpi);
        let mut body = format!("<< /Length {} >>\nstream\n", content.len()).into_bytes();
        body.extend_from_slice(content.as_bytes());
        body.extend_from_slice(b"\nendstream");
        object(&mut out, &body);
        let data = deflate(&page.image.pixels)?;
        let mut body = format!(
            "<< /Type /XObject /Subtype /Image /Width {} /Height {} /ColorSpace /DeviceGray /BitsPerComponent 8 /Filter /FlateDecode /Length {} >>\nstream\n",
            page.image.width,
            page.image.height,
            data.len()
        )
        .into_bytes();
        body.extend_from_slice(&data);
        body.extend_from_slice(b"\nendstream");
        object(&mut out, &body);
    }
    let xref = out.len();
    let mut tail = format!("xref\n0 {}\n0000000000 65535 f \n", offsets.len() + 1);
    for o in &offsets {
        let _ = writeln!(tail, "{o:010} 00000 n ");
    }
    let _ = write!(tail, "trailer\n<< /Size {} /Root 1 0 R >>\nstartxref\n{xref}\n%%EOF\n", offsets.len() + 1);
    out.extend_from_slice(tail.as_bytes());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::printout::MarkerBoardSpec;
    use crate::scene::tests::{cube_at, desk_library};

    fn a4_scene() -> Scene {
        let mut s = Scene::new([0.297, 0.21], "lib.yaml").unwrap();
        s.instances.push(cube_at(0.15, 0.1));
        s
    }

    #[test]
    fn tiling_arithmetic() {
        let a2 = [594.0, 420.0];
        let one = plan_tiles(a2, [420.0, 594.0], 10.0).unwrap();
        assert_eq!(one.grid, [1, 1]);
        assert_eq!(one.page_mm, [594.0, 420.0]);
        let four = plan_tiles(a2, [210.0, 297.0], 10.0).unwrap();
        assert_eq!(four.grid, [2, 2]);
        assert_eq!(four.page_mm, [297.0, 210.0]);
        // exact halves leave no room for overlap
        assert_eq!(four.overlap_mm, [0.0, 0.0]);
        // A3 sheet on 250 x 250 pages: 2 x 2 with capped and spare-limited overlaps
        let p = plan_tiles([420.0, 297.0], [250.0, 250.0], 10.0).unwrap();
        assert_eq!(p.grid, [2, 2]);
        assert_eq!(p.overlap_mm, [10.0, 10.0]);
        let q = plan_tiles([495.0, 200.0], [250.0, 250.0], 10.0).unwrap();
        assert!((q.overlap_mm[0] - 5.0).abs() < 1e-12);
        for plan in [four, p, q] {
            for axis in 0..2 {
                let covered = plan.grid[axis] as f64 * plan.page_mm[axis] - (plan.grid[axis] - 1) as f64 * plan.overlap_mm[axis];
                let sheet = [[594.0, 420.0], [420.0, 297.0], [495.0, 200.0]];
                assert!(sheet.iter().any(|s| covered >= s[axis] - 1e-9));
            }
        }
        assert!(matches!(plan_tiles(a2, [99.0, 297.0], 10.0), Err(Error::PageTooSmall { .. })));
    }

    #[test]
    fn single_page_pdf_is_well_formed() {
        let lib = desk_library();
        let opts = PrintoutOptions { page_mm: [297.0, 210.0], dpi: 100.0, overlap_mm: 10.0 };
        let doc = compose_printout(&a4_scene(), &lib, &opts, Path::new(".")).unwrap();
        assert_eq!(doc.pages.len(), 1);
        let pdf = &doc.pdf;
        let find = |pat: &[u8]| pdf.windows(pat.len()).rposition(|w| w == pat).unwrap();
        assert!(pdf.starts_with(b"%PDF-1.4"));
        assert!(pdf.ends_with(b"%%EOF\n"));
        find(b"/MediaBox [0 0 841.8898 595.2756]");
        // xref offsets point at object headers
        let tail = std::str::from_utf8(&pdf[find(b"\nxref\n") + 1..]).unwrap();
        let start: usize = tail.rsplit("startxref\n").next().unwrap().lines().next().unwrap().parse().unwrap();
        assert!(pdf[start..].starts_with(b"xref"));
        let entry = &tail.lines().nth(4).unwrap()[..10];
        let off: usize = entry.parse().unwrap();
        assert!(pdf[off..].starts_with(b"2 0 obj"));
        let again = compose_printout(&a4_scene(), &lib, &opts, Path::new(".")).unwrap();
        assert_eq!(doc.pdf, again.pdf);
    }

    #[test]
    fn board_band_and_clipping_warning() {
        let lib = desk_library();
        let mut scene = a4_scene();
        scene.board = Some(MarkerBoardSpec::default());
        let sheet = compose_sheet(&scene, &lib, 100.0, Path::new(".")).unwrap();
        assert!(sheet.warnings.is_empty());
        // lower-left marker corner pixel is border black
        let mpp = 25.4 / 100.0;
        let col = (7.0 / mpp) as usize;
        let row = sheet.image.height - 1 - (7.0 / mpp) as usize;
        assert_eq!(sheet.image.get(col, row), 0);
        // a cube overlapping the band
        scene.instances.push(cube_at(0.03, 0.1));
        let sheet = compose_sheet(&scene, &lib, 100.0, Path::new(".")).unwrap();
        assert_eq!(sheet.warnings.len(), 1);
        // nothing of it survives left of the object area at mid height
        let inset = 2.0 * 6.0 + 30.0;
        let row = sheet.image.height / 2;
        for c in 0..((inset / mpp) as usize - 1) {
            let [x, y] = pixel_centre_mm(c, row, sheet.image.height, mpp);
            let layout_white = sheet.image.get(c, row) == 255;
            let in_marker = MarkerBoardSpec::default()
                .layout([297.0, 210.0], &MarkerDictionary::builtin())
                .unwrap()
                .sample(&MarkerDictionary::builtin(), x, y)
                .is_some();
            assert!(layout_white || in_marker, "height map leaked at {x},{y}");
        }
    }
}
