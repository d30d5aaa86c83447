//! Convex hulls: dimension-generic quickhull over simplicial facets, and a
//! 2D monotone chain.

use std::collections::HashMap;

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// `dim` point indices spanning the facet.
    pub vertices: Vec<usize>,
    /// Outward unit normal.
    pub normal: Vec<f64>,
    /// `normal . x = offset` on the facet plane.
    pub offset: f64,
}

impl Facet {
    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        dot(&self.normal, p) - self.offset
    }
}

#[derive(Debug, Clone)]
pub struct Hull {
    pub dim: usize,
    pub facets: Vec<Facet>,
    /// Tolerance used for the outside test.
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HullError {
    /// Fewer points than `dim + 1`.
    TooFewPoints,
    /// The points span an affine subspace of dimension `rank < dim`.
    Degenerate { rank: usize },
}

struct WorkFacet {
    vertices: Vec<usize>,
    neighbors: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quickhull over `points` (flattened, `dim` coordinates each).
pub fn quickhull(points: &[f64], dim: usize) -> Result<Hull, HullError> {
    assert!(dim >= 2 && points.len() % dim == 0);
    let n = points.len() / dim;
    if n < dim + 1 {
        return Err(HullError::TooFewPoints);
    }
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let scale = points.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let eps = 1e-11 * scale;
    let rank_tol = 1e-9 * scale;

    let simplex = initial_simplex(points, dim, n, rank_tol)?;
    let mut interior = vec![0.0; dim];
    for &i in &simplex {
        for (c, v) in interior.iter_mut().zip(pt(i)) {
            *c += v / (dim + 1) as f64;
        }
    }

    let mut facets: Vec<WorkFacet> = Vec::new();
    for skip in 0..=dim {
        let verts: Vec<usize> = simplex
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != skip)
            .map(|(_, &v)| v)
            .collect();
        let (normal, offset) = hyperplane(points, dim, &verts, &interior);
        facets.push(WorkFacet {
            vertices: verts,
            neighbors: vec![usize::MAX; dim],
            normal,
            offset,
            outside: Vec::new(),
            alive: true,
        });
    }
    let all: Vec<usize> = (0..facets.len()).collect();
    link_new(&mut facets, &all);

    let in_simplex: std::collections::HashSet<usize> = simplex.iter().copied().collect();
    for i in (0..n).filter(|i| !in_simplex.contains(i)) {
        for f in facets.iter_mut() {
            if dot(&f.normal, pt(i)) - f.offset > eps {
                f.outside.push(i);
                break;
            }
        }
    }

    let mut pending: Vec<usize> = (0..facets.len()).collect();
    while let Some(fi) = pending.pop() {
        if !facets[fi].alive || facets[fi].outside.is_empty() {
            continue;
        }
        let apex = {
            let f = &facets[fi];
            *f.outside
                .iter()
                .max_by(|&&a, &&b| {
                    let da = dot(&f.normal, pt(a));
                    let db = dot(&f.normal, pt(b));
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .unwrap()
        };
        let p = pt(apex);

        // visible region by flood fill
        let mut visible = vec![fi];
        let mut is_visible: HashMap<usize, bool> = HashMap::from([(fi, true)]);
        let mut k = 0;
        while k < visible.len() {
            let v = visible[k];
            k += 1;
            for s in 0..dim {
                let g = facets[v].neighbors[s];
                if is_visible.contains_key(&g) {
                    continue;
                }
                let vis = dot(&facets[g].normal, p) - facets[g].offset > eps;
                is_visible.insert(g, vis);
                if vis {
                    visible.push(g);
                }
            }
        }

        // horizon ridges -> new facets
        let mut created = Vec::new();
        for &v in &visible {
            for s in 0..dim {
                let g = facets[v].neighbors[s];
                if is_visible[&g] {
                    continue;
                }
                let mut verts: Vec<usize> = facets[v]
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != s)
                    .map(|(_, &x)| x)
                    .collect();
                verts.push(apex);
                let (normal, offset) = hyperplane(points, dim, &verts, &interior);
                let id = facets.len();
                let mut neighbors = vec![usize::MAX; dim];
                neighbors[dim - 1] = g;
                facets.push(WorkFacet {
                    vertices: verts,
                    neighbors,
                    normal,
                    offset,
                    outside: Vec::new(),
                    alive: true,
                });
                let slot = facets[g].neighbors.iter().position(|&x| x == v).unwrap();
                facets[g].neighbors[slot] = id;
                created.push(id);
            }
        }
        link_new(&mut facets, &created);

        let mut orphans = Vec::new();
        for &v in &visible {
            facets[v].alive = false;
            orphans.append(&mut facets[v].outside);
        }
        for i in orphans.into_iter().filter(|&i| i != apex) {
            for &c in &created {
                let f = &mut facets[c];
                if dot(&f.normal, pt(i)) - f.offset > eps {
                    f.outside.push(i);
                    break;
                }
            }
        }
        pending.extend(created);
    }

    let facets = facets
        .into_iter()
        .filter(|f| f.alive)
        .map(|f| Facet {
            vertices: f.vertices,
            normal: f.normal,
            offset: f.offset,
        })
        .collect();
    Ok(Hull { dim, facets, eps })
}

/// Connects the ridges of `ids` that are shared with each other (the ridge
/// opposite the last vertex of a freshly created facet is already linked).
fn link_new(facets: &mut [WorkFacet], ids: &[usize]) {
    let mut open: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
    for &f in ids {
        let dim = facets[f].vertices.len();
        for s in 0..dim {
            if facets[f].neighbors[s] != usize::MAX {
                continue;
            }
            let mut key: Vec<usize> = facets[f]
                .vertices
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != s)
                .map(|(_, &x)| x)
                .collect();
            key.sort_unstable();
            if let Some((g, gs)) = open.remove(&key) {
                facets[f].neighbors[s] = g;
                facets[g].neighbors[gs] = f;
            } else {
                open.insert(key, (f, s));
            }
        }
    }
    debug_assert!(open.is_empty(), "unmatched ridges in hull update");
}

fn initial_simplex(points: &[f64], dim: usize, n: usize, tol: f64) -> Result<Vec<usize>, HullError> {
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let first = (0..n)
        .min_by(|&a, &b| pt(a)[0].total_cmp(&pt(b)[0]).then(a.cmp(&b)))
        .unwrap();
    let mut chosen = vec![first];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while chosen.len() < dim + 1 {
        let origin = pt(first);
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for i in 0..n {
            let mut v: Vec<f64> = pt(i).iter().zip(origin).map(|(a, b)| a - b).collect();
            for e in &basis {
                let d = dot(&v, e);
                for (x, y) in v.iter_mut().zip(e) {
                    *x -= d * y;
                }
            }
            let dist = dot(&v, &v).sqrt();
            if best.as_ref().is_none_or(|(bd, _, _)| dist > *bd) {
                best = Some((dist, i, v));
            }
        }
        let (dist, i, v) = best.unwrap();
        if dist <= tol {
            return Err(HullError::Degenerate { rank: chosen.len() - 1 });
        }
        basis.push(v.iter().map(|x| x / dist).collect());
        chosen.push(i);
    }
    Ok(chosen)
}

/// Hyperplane through `verts` with the normal oriented away from `interior`.
fn hyperplane(points: &[f64], dim: usize, verts: &[usize], interior: &[f64]) -> (Vec<f64>, f64) {
    let pt = |i: usize| &points[i * dim..(i + 1) * dim];
    let base = pt(verts[0]);
    let rows = DMatrix::from_fn(dim - 1, dim, |r, c| pt(verts[r + 1])[c] - base[c]);
    let mut normal = vec![0.0; dim];
    for (j, slot) in normal.iter_mut().enumerate() {
        let minor = rows.clone().remove_column(j);
        let det = if dim == 2 { minor[(0, 0)] } else { minor.determinant() };
        *slot = if j % 2 == 0 { det } else { -det };
    }
    let len = dot(&normal, &normal).sqrt();
    if len > 0.0 {
        for c in normal.iter_mut() {
            *c /= len;
        }
    }
    let mut offset = dot(&normal, base);
    if dot(&normal, interior) - offset > 0.0 {
        for c in normal.iter_mut() {
            *c = -*c;
        }
        offset = -offset;
    }
    (normal, offset)
}

fn cross2(o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain. Returns hull vertex indices counter-clockwise,
/// collinear points dropped.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross2(&points[hull[hull.len() - 2]], &points[hull[hull.len() - 1]], &points[i]) <= 0.0
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

/// Signed distance from `p` to the boundary of a counter-clockwise convex
/// polygon: positive inside. Degenerate polygons (fewer than three
/// vertices) report negative infinity.
pub fn polygon_inside_margin(polygon: &[[f64; 2]], p: &[f64; 2]) -> f64 {
    if polygon.len() < 3 {
        return f64::NEG_INFINITY;
    }
    let mut margin = f64::INFINITY;
    for k in 0..polygon.len() {
        let a = polygon[k];
        let b = polygon[(k + 1) % polygon.len()];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len = (ex * ex + ey * ey).sqrt();
        if len == 0.0 {
            continue;
        }
        // left normal points inward for ccw order
        let d = (ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / len;
        margin = margin.min(d);
    }
    margin
}

pub fn polygon_area(polygon: &[[f64; 2]]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|k| {
            let a = polygon[k];
            let b = polygon[(k + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}
