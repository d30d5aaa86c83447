//! Fiducial marker dictionary and perimeter-band board layout.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textfmt::from_json;

/// Name of the dictionary shipped with the crate (4x4 bits, ids 0..50).
pub const BUILTIN_DICTIONARY: &str = "aruco_4x4_50";
const BUILTIN_JSON: &str = include_str!("../../data/aruco_4x4_50.json");

/// Square bit matrices keyed by marker id. `true` is a white cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerDictionary {
    bits: usize,
    markers: BTreeMap<u32, Vec<Vec<bool>>>,
}

impl MarkerDictionary {
    pub fn builtin() -> MarkerDictionary {
        parse_marker_dictionary(BUILTIN_JSON.as_bytes()).expect("bundled dictionary is valid")
    }

    /// `name` is either [`BUILTIN_DICTIONARY`] or a JSON file path, relative
    /// paths resolving against `base_dir`.
    pub fn resolve(name: &str, base_dir: &Path) -> Result<MarkerDictionary> {
        if name == BUILTIN_DICTIONARY {
            return Ok(Self::builtin());
        }
        let path = base_dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        parse_marker_dictionary(&bytes)
    }

    /// Inner bit count per side (without the black border).
    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn get(&self, id: u32) -> Result<&[Vec<bool>]> {
        self.markers.get(&id).map(Vec::as_slice).ok_or(Error::UnknownMarkerId(id))
    }

    /// Cell colour including the one-cell black border; `row` 0 is the top.
    pub fn cell(&self, id: u32, row: usize, col: usize) -> Result<bool> {
        let m = self.get(id)?;
        let n = self.bits;
        if row == 0 || col == 0 || row > n || col > n {
            return Ok(false);
        }
        Ok(m[row - 1][col - 1])
    }
}

/// Parses `{"<id>": ["0101", ...], ...}`. Every marker must be square and the
/// same size.
pub fn parse_marker_dictionary(bytes: &[u8]) -> Result<MarkerDictionary> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::schema(".", e.to_string()))?;
    let raw: BTreeMap<String, Vec<String>> = from_json(text)?;
    let mut markers = BTreeMap::new();
    let mut bits = None;
    for (key, rows) in raw {
        let id: u32 = key
            .parse()
            .map_err(|_| Error::schema(key.clone(), "marker ids must be non-negative integers"))?;
        let n = rows.len();
        if n == 0 {
            return Err(Error::schema(key, "empty bit matrix"));
        }
        if *bits.get_or_insert(n) != n {
            return Err(Error::schema(key, format!("expected {} rows, found {n}", bits.unwrap_or(0))));
        }
        let mut matrix = Vec::with_capacity(n);
        for (r, row) in rows.iter().enumerate() {
            let cells: Option<Vec<bool>> = row
                .chars()
                .map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .collect();
            match cells {
                Some(cells) if cells.len() == n => matrix.push(cells),
                _ => {
                    return Err(Error::schema(
                        format!("{key}[{r}]"),
                        format!("expected {n} characters of 0/1, found {row:?}"),
                    ))
                }
            }
        }
        if markers.insert(id, matrix).is_some() {
            return Err(Error::schema(key, "duplicate marker id"));
        }
    }
    match bits {
        Some(bits) => Ok(MarkerDictionary { bits, markers }),
        None => Err(Error::schema(".", "dictionary has no markers")),
    }
}

fn default_dictionary() -> String {
    BUILTIN_DICTIONARY.to_string()
}

fn default_marker_mm() -> f64 {
    30.0
}

fn default_spacing_mm() -> f64 {
    6.0
}

/// Marker board printed under the scene. The board covers the ground area,
/// offset by `origin_mm` in the scene frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerBoardSpec {
    #[serde(default = "default_dictionary")]
    pub dictionary: String,
    #[serde(default = "default_marker_mm")]
    pub marker_mm: f64,
    #[serde(default = "default_spacing_mm")]
    pub spacing_mm: f64,
    #[serde(default)]
    pub first_id: u32,
    /// Markers along the width and depth edges; the most that fit when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[u32; 2]>,
    #[serde(default)]
    pub origin_mm: [f64; 2],
}

impl Default for MarkerBoardSpec {
    fn default() -> Self {
        MarkerBoardSpec {
            dictionary: default_dictionary(),
            marker_mm: default_marker_mm(),
            spacing_mm: default_spacing_mm(),
            first_id: 0,
            grid: None,
            origin_mm: [0.0, 0.0],
        }
    }
}

/// One placed marker; `x_mm`, `y_mm` is its lower-left corner in board coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedMarker {
    pub id: u32,
    pub x_mm: f64,
    pub y_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoardLayout {
    pub size_mm: [f64; 2],
    pub marker_mm: f64,
    /// Markers per width edge and per depth edge (corners shared).
    pub per_edge: [usize; 2],
    pub markers: Vec<PlacedMarker>,
    /// Region inside the band, `[x0, y0, x1, y1]` in board millimetres.
    pub object_area_mm: [f64; 4],
}

/// Most markers that fit along one edge of length `side`.
pub fn markers_per_edge(side_mm: f64, marker_mm: f64, spacing_mm: f64) -> usize {
    let n = ((side_mm - spacing_mm) / (marker_mm + spacing_mm)).floor();
    if n.is_finite() && n > 0.0 {
        n as usize
    } else {
        0
    }
}

fn edge_positions(n: usize, side: f64, marker: f64, spacing: f64) -> Vec<f64> {
    let span = side - 2.0 * spacing - marker;
    (0..n).map(|i| spacing + span * i as f64 / (n - 1) as f64).collect()
}

impl MarkerBoardSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.marker_mm.is_finite() && self.marker_mm > 0.0) {
            return Err(Error::invalid("marker_mm", format!("must be positive, got {}", self.marker_mm)));
        }
        if !(self.spacing_mm.is_finite() && self.spacing_mm >= 0.0) {
            return Err(Error::invalid("spacing_mm", format!("must be non-negative, got {}", self.spacing_mm)));
        }
        if !self.origin_mm.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("origin_mm", "must be finite"));
        }
        Ok(())
    }

    /// Perimeter band on a `size_mm` board: markers run anticlockwise from the
    /// board origin corner, evenly stretched so each corner holds one marker.
    pub fn layout(&self, size_mm: [f64; 2], dictionary: &MarkerDictionary) -> Result<BoardLayout> {
        self.validate()?;
        let (m, s) = (self.marker_mm, self.spacing_mm);
        let fit = [markers_per_edge(size_mm[0], m, s), markers_per_edge(size_mm[1], m, s)];
        let per_edge = match self.grid {
            None => fit,
            Some([a, b]) => {
                let want = [a as usize, b as usize];
                if want[0] > fit[0] || want[1] > fit[1] {
                    return Err(Error::BoardOverflow(format!(
                        "{}x{} markers requested, at most {}x{} fit",
                        want[0], want[1], fit[0], fit[1]
                    )));
                }
                want
            }
        };
        if per_edge[0] < 2 || per_edge[1] < 2 {
            return Err(Error::BoardOverflow(format!(
                "a {:.1}x{:.1} mm board cannot hold a band of {m} mm markers with {s} mm spacing",
                size_mm[0], size_mm[1]
            )));
        }
        let xs = edge_positions(per_edge[0], size_mm[0], m, s);
        let ys = edge_positions(per_edge[1], size_mm[1], m, s);
        let (x_last, y_last) = (xs[xs.len() - 1], ys[ys.len() - 1]);
        let mut corners: Vec<(f64, f64)> = Vec::with_capacity(2 * (xs.len() + ys.len()) - 4);
        corners.extend(xs.iter().map(|&x| (x, ys[0])));
        corners.extend(ys[1..].iter().map(|&y| (x_last, y)));
        corners.extend(xs[..xs.len() - 1].iter().rev().map(|&x| (x, y_last)));
        corners.extend(ys[1..ys.len() - 1].iter().rev().map(|&y| (xs[0], y)));
        let mut markers = Vec::with_capacity(corners.len());
        for (i, (x, y)) in corners.into_iter().enumerate() {
            let id = self
                .first_id
                .checked_add(i as u32)
                .ok_or(Error::UnknownMarkerId(u32::MAX))?;
            dictionary.get(id)?;
            markers.push(PlacedMarker { id, x_mm: x, y_mm: y });
        }
        let inset = 2.0 * s + m;
        Ok(BoardLayout {
            size_mm,
            marker_mm: m,
            per_edge,
            markers,
            object_area_mm: [inset, inset, size_mm[0] - inset, size_mm[1] - inset],
        })
    }
}

impl BoardLayout {
    /// Colour of the board at board coordinates (mm): `Some(white)` inside a
    /// marker, `None` elsewhere.
    pub fn sample(&self, dictionary: &MarkerDictionary, x_mm: f64, y_mm: f64) -> Option<bool> {
        let cells = dictionary.bits() + 2;
        let cell = self.marker_mm / cells as f64;
        for mk in &self.markers {
            let (dx, dy) = (x_mm - mk.x_mm, y_mm - mk.y_mm);
            if dx >= 0.0 && dy >= 0.0 && dx < self.marker_mm && dy < self.marker_mm {
                let col = ((dx / cell) as usize).min(cells - 1);
                let row = cells - 1 - ((dy / cell) as usize).min(cells - 1);
                return dictionary.cell(mk.id, row, col).ok();
            }
        }
        None
    }

    pub fn in_object_area(&self, x_mm: f64, y_mm: f64) -> bool {
        let [x0, y0, x1, y1] = self.object_area_mm;
        x_mm >= x0 && x_mm <= x1 && y_mm >= y0 && y_mm <= y1
    }
}
