//! Dense two-phase simplex with Bland's rule, sized for the handful of rows
//! a wrench-feasibility problem needs. All variables are non-negative.

/// Bound on the summed phase-one infeasibility of the row-normalised system.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

const PIVOT_TOLERANCE: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpSolution {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpSolution::Infeasible)
    }
}

/// `minimise c.x  s.t.  rows,  x >= 0`.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram { n: n_vars, objective: vec![0.0; n_vars], rows: Vec::new() }
    }

    pub fn minimise(&mut self, c: &[f64]) -> &mut Self {
        assert_eq!(c.len(), self.n);
        self.objective = c.to_vec();
        self
    }

    pub fn constraint(&mut self, coeffs: &[f64], rel: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.n);
        self.rows.push((coeffs.to_vec(), rel, rhs));
        self
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn solve(&self) -> LpSolution {
        let Some(rows) = self.normalised_rows() else {
            return LpSolution::Infeasible;
        };
        let m = rows.len();
        let n = self.n;
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let cols = n + n_slack + n_art;
        let art_start = n + n_slack;

        let mut t = Tableau { a: vec![vec![0.0; cols + 1]; m], basis: vec![0; m], cols };
        let (mut s, mut a) = (n, art_start);
        for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            t.a[i][..n].copy_from_slice(coeffs);
            t.a[i][cols] = *rhs;
            match rel {
                Relation::Le => {
                    t.a[i][s] = 1.0;
                    t.basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    t.a[i][s] = -1.0;
                    s += 1;
                    t.a[i][a] = 1.0;
                    t.basis[i] = a;
                    a += 1;
                }
                Relation::Eq => {
                    t.a[i][a] = 1.0;
                    t.basis[i] = a;
                    a += 1;
                }
            }
        }

        if n_art > 0 {
            let mut cost = vec![0.0; cols];
            cost[art_start..].iter_mut().for_each(|c| *c = 1.0);
            match t.optimise(&cost, cols) {
                Some(v) if v <= FEASIBILITY_TOLERANCE => {}
                _ => return LpSolution::Infeasible,
            }
            t.drive_out_artificials(art_start);
        }

        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&self.objective);
        if t.optimise(&cost, art_start).is_none() {
            return LpSolution::Unbounded;
        }
        let mut x = vec![0.0; n];
        for (i, &b) in t.basis.iter().enumerate() {
            if b < n {
                x[b] = t.a[i][cols].max(0.0);
            }
        }
        let value = x.iter().zip(&self.objective).map(|(a, b)| a * b).sum();
        LpSolution::Optimal { x, value }
    }

    /// Rows scaled to unit max-norm with non-negative right-hand sides.
    /// `None` when an all-zero row is itself violated.
    fn normalised_rows(&self) -> Option<Vec<(Vec<f64>, Relation, f64)>> {
        let mut out = Vec::with_capacity(self.rows.len());
        for (coeffs, rel, rhs) in &self.rows {
            let scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                let ok = match rel {
                    Relation::Le => *rhs >= -FEASIBILITY_TOLERANCE,
                    Relation::Ge => *rhs <= FEASIBILITY_TOLERANCE,
                    Relation::Eq => rhs.abs() <= FEASIBILITY_TOLERANCE,
                };
                if !ok {
                    return None;
                }
                continue;
            }
            let scale = scale.max(rhs.abs());
            let mut c: Vec<f64> = coeffs.iter().map(|v| v / scale).collect();
            let mut b = rhs / scale;
            let mut r = *rel;
            if b < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
                b = -b;
                r = match r {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
            out.push((c, r, b));
        }
        Some(out)
    }
}

struct Tableau {
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.a[row][col];
        self.a[row].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.a[row].clone();
        for (i, r) in self.a.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, p) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Minimises `cost` over columns `< allowed`; returns the optimum or
    /// `None` if unbounded.
    fn optimise(&mut self, cost: &[f64], allowed: usize) -> Option<f64> {
        let rhs = self.cols;
        for _ in 0..MAX_PIVOTS {
            // reduced costs d_j = c_j - c_B . column_j
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let d = cost[j] - self.a.iter().zip(&self.basis).map(|(r, &b)| cost[b] * r[j]).sum::<f64>();
                d < -PIVOT_TOLERANCE
            });
            let Some(j) = entering else {
                return Some(self.a.iter().zip(&self.basis).map(|(r, &b)| cost[b] * r[rhs]).sum());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, r) in self.a.iter().enumerate() {
                if r[j] > PIVOT_TOLERANCE {
                    let ratio = r[rhs] / r[j];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * best.abs().max(1.0);
                            if ratio < best && !tie || tie && self.basis[i] < self.basis[k] {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let (row, _) = leave?;
            self.pivot(row, j);
        }
        log::warn!("simplex pivot limit reached");
        Some(f64::INFINITY)
    }

    /// After phase one, swaps zero-level artificials for structural columns;
    /// rows where that is impossible are redundant and dropped.
    fn drive_out_artificials(&mut self, art_start: usize) {
        let mut i = 0;
        while i < self.a.len() {
            if self.basis[i] >= art_start {
                match (0..art_start).find(|&j| self.a[i][j].abs() > PIVOT_TOLERANCE) {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.a.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
}
