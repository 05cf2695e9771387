//! Log-odds coordinates, likelihood-ordering halfspaces and simplex cells.
//!
//! With the last category as reference, `u_i = ln(p_i / p_k)` maps the open
//! simplex onto `ℝ^{k-1}` and
//!
//! ```text
//! ln P_{p(u)}(r) = ln κ(r) + Σ_{i<k} r_i u_i − n · ln(1 + Σ_j e^{u_j})
//! ```
//!
//! The normaliser is shared by all outcomes, so comparing two outcomes is an
//! affine test in `u`.

use serde::{Deserialize, Serialize};

use crate::error::{MvcError, Result};
use crate::multinomial::{CountVector, OutcomeTable, SimplexPoint};

/// Default classification slack: a float-rounding guard around `g = 0`.
pub const DEFAULT_SLACK: f64 = 1e-12;

/// Relative pivot tolerance of the affine-independence check.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogOddsPoint(Vec<f64>);

impl LogOddsPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(MvcError::InvalidPoint("log-odds coordinates must be finite".into()));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `ln(1 + Σ e^{u_j})`, evaluated with max-subtraction.
pub fn log_normalizer(u: &[f64]) -> f64 {
    let m = u.iter().copied().fold(0.0f64, f64::max);
    let s: f64 = u.iter().map(|&x| (x - m).exp()).sum::<f64>() + (-m).exp();
    m + s.ln()
}

/// `u_i = ln(p_i / p_k)`; fails on boundary points.
pub fn to_logodds(p: &SimplexPoint) -> Result<LogOddsPoint> {
    let probs = p.probs();
    if probs.len() < 2 {
        return Err(MvcError::InvalidDimension("need at least 2 categories".into()));
    }
    if let Some(index) = probs.iter().position(|&x| x <= 0.0) {
        return Err(MvcError::BoundaryPoint { index });
    }
    let ln_ref = probs[probs.len() - 1].ln();
    LogOddsPoint::new(probs[..probs.len() - 1].iter().map(|x| x.ln() - ln_ref).collect())
}

/// Softmax with an implicit zero for the reference category.
pub fn from_logodds(u: &LogOddsPoint) -> SimplexPoint {
    SimplexPoint::from_raw(softmax_with_reference(u.coords()))
}

pub(crate) fn softmax_with_reference(u: &[f64]) -> Vec<f64> {
    let m = u.iter().copied().fold(0.0f64, f64::max);
    let mut e: Vec<f64> = u.iter().map(|&x| (x - m).exp()).collect();
    e.push((-m).exp());
    let s: f64 = e.iter().sum();
    for x in &mut e {
        *x /= s;
    }
    e
}

/// `g(u) = Σ (r_i − r̂_i) u_i − (ln κ(r̂) − ln κ(r))`.
///
/// `g(u) <= 0` exactly when `r` is at most as likely as `r̂` under `p(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceFunctional {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfspaceFunctional {
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.normal.iter().zip(u).map(|(a, x)| a * x).sum::<f64>() - self.offset
    }
}

pub fn halfspace_for(r: &CountVector, r_hat: &CountVector, table: &OutcomeTable) -> Result<HalfspaceFunctional> {
    let i = table.locate(r)?;
    let h = table.locate(r_hat)?;
    Ok(halfspace_by_index(table, i, h))
}

pub(crate) fn halfspace_by_index(table: &OutcomeTable, r: usize, hat: usize) -> HalfspaceFunctional {
    let k = table.k();
    let (ro, ho) = (table.outcome(r), table.outcome(hat));
    HalfspaceFunctional {
        normal: (0..k - 1).map(|i| f64::from(ro[i]) - f64::from(ho[i])).collect(),
        offset: table.log_kappa(hat) - table.log_kappa(r),
    }
}

/// A `(k-1)`-simplex in log-odds space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexCell {
    vertices: Vec<LogOddsPoint>,
    generation: u32,
}

impl SimplexCell {
    /// Builds a cell after checking vertex count, dimensions and affine independence.
    pub fn new(vertices: Vec<LogOddsPoint>, generation: u32) -> Result<Self> {
        let dim = vertices.first().map_or(0, LogOddsPoint::dim);
        if dim == 0 {
            return Err(MvcError::DegenerateCell("cell needs a positive dimension".into()));
        }
        if vertices.len() != dim + 1 || vertices.iter().any(|v| v.dim() != dim) {
            return Err(MvcError::DegenerateCell(format!(
                "a {dim}-simplex needs {} vertices of dimension {dim}",
                dim + 1
            )));
        }
        let cell = Self { vertices, generation };
        if !cell.is_affinely_independent() {
            return Err(MvcError::DegenerateCell("vertices are affinely dependent".into()));
        }
        Ok(cell)
    }

    /// Skips the rank check. Degenerate cells are only meaningful in tests.
    #[doc(hidden)]
    pub fn new_unchecked(vertices: Vec<LogOddsPoint>, generation: u32) -> Self {
        Self { vertices, generation }
    }

    pub fn vertices(&self) -> &[LogOddsPoint] {
        &self.vertices
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(squared_distance(a.coords(), b.coords()));
            }
        }
        best.sqrt()
    }

    pub fn centroid(&self) -> LogOddsPoint {
        LogOddsPoint(self.combination(&vec![1.0 / self.vertices.len() as f64; self.vertices.len()]))
    }

    /// `Σ λ_j w_j` for barycentric weights `λ`.
    pub fn combination(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (w, v) in weights.iter().zip(&self.vertices) {
            for (o, c) in out.iter_mut().zip(v.coords()) {
                *o += w * c;
            }
        }
        out
    }

    /// Barycentric coordinates of `u`, or `None` if the cell is degenerate.
    pub fn barycentric(&self, u: &[f64]) -> Option<Vec<f64>> {
        let d = self.dim();
        let origin = self.vertices[0].coords();
        // Columns are w_j − w_0; solve for λ_1..λ_d.
        let mut a: Vec<Vec<f64>> = (0..d)
            .map(|row| {
                let mut line: Vec<f64> = (1..=d)
                    .map(|j| self.vertices[j].coords()[row] - origin[row])
                    .collect();
                line.push(u[row] - origin[row]);
                line
            })
            .collect();
        let lambdas = solve_in_place(&mut a)?;
        let mut out = Vec::with_capacity(d + 1);
        out.push(1.0 - lambdas.iter().sum::<f64>());
        out.extend(lambdas);
        Some(out)
    }

    fn is_affinely_independent(&self) -> bool {
        let diam = self.diameter();
        if !(diam > 0.0) || !diam.is_finite() {
            return false;
        }
        let origin = self.vertices[0].coords();
        let mut rows: Vec<Vec<f64>> = self.vertices[1..]
            .iter()
            .map(|v| v.coords().iter().zip(origin).map(|(a, b)| (a - b) / diam).collect())
            .collect();
        let d = rows.len();
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&x, &y| rows[x][col].abs().total_cmp(&rows[y][col].abs()))
                .expect("non-empty range");
            if rows[pivot][col].abs() < RANK_TOLERANCE {
                return false;
            }
            rows.swap(col, pivot);
            for r in col + 1..d {
                let f = rows[r][col] / rows[col][col];
                for c in col..d {
                    rows[r][c] -= f * rows[col][c];
                }
            }
        }
        true
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Gaussian elimination on an augmented `d × (d+1)` system.
fn solve_in_place(a: &mut [Vec<f64>]) -> Option<Vec<f64>> {
    let d = a.len();
    for col in 0..d {
        let pivot = (col..d).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..d {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=d {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..d).map(|i| a[i][d] / a[i][i]).collect())
}

/// Outcome indices split by their tail status over a whole cell.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TailClassification {
    pub in_tail: Vec<usize>,
    pub out_of_tail: Vec<usize>,
    pub ambiguous: Vec<usize>,
}

/// Vertex test of every halfspace functional against `r̂`.
///
/// `in_tail`: `g <= −slack` at all vertices. `out_of_tail`: `g > slack` at all
/// vertices. Everything else is ambiguous, including `r̂` itself when `slack > 0`.
pub fn classify_cell(
    cell: &SimplexCell,
    r_hat: &CountVector,
    table: &OutcomeTable,
    slack: f64,
) -> Result<TailClassification> {
    let hat = table.locate(r_hat)?;
    if cell.dim() + 1 != table.k() {
        return Err(MvcError::DimensionMismatch {
            expected: table.k() - 1,
            got: cell.dim(),
        });
    }
    let mut out = TailClassification::default();
    for r in 0..table.len() {
        let g = halfspace_by_index(table, r, hat);
        let values = cell.vertices().iter().map(|w| g.eval(w.coords()));
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if hi <= -slack {
            out.in_tail.push(r);
        } else if lo > slack {
            out.out_of_tail.push(r);
        } else {
            out.ambiguous.push(r);
        }
    }
    Ok(out)
}

/// Longest-edge bisection.
///
/// The longest edge `(i, j)` (lowest index pair on ties) is split at its
/// midpoint; the first child replaces `w_j`, the second replaces `w_i`.
pub fn bisect(cell: &SimplexCell) -> Result<(SimplexCell, SimplexCell)> {
    let (i, j) = longest_edge(cell);
    let mid: Vec<f64> = cell.vertices[i]
        .coords()
        .iter()
        .zip(cell.vertices[j].coords())
        .map(|(a, b)| (a + b) * 0.5)
        .collect();
    let mid = LogOddsPoint(mid);
    let mut first = cell.vertices.clone();
    first[j] = mid.clone();
    let mut second = cell.vertices.clone();
    second[i] = mid;
    let generation = cell.generation + 1;
    Ok((SimplexCell::new(first, generation)?, SimplexCell::new(second, generation)?))
}

fn longest_edge(cell: &SimplexCell) -> (usize, usize) {
    let mut best = (0, 1);
    let mut best_len = f64::NEG_INFINITY;
    let vs = &cell.vertices;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            let len = squared_distance(vs[i].coords(), vs[j].coords());
            if len > best_len {
                best_len = len;
                best = (i, j);
            }
        }
    }
    best
}

/// Kuhn (Freudenthal) split of an axis-aligned box into `d!` simplices.
///
/// Vertex coordinates are copied from `lower`/`upper` exactly, so cells share
/// bit-identical vertices.
pub fn kuhn_triangulation(lower: &[f64], upper: &[f64]) -> Result<Vec<SimplexCell>> {
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(MvcError::InvalidDimension("box bounds must have equal positive length".into()));
    }
    let d = lower.len();
    let mut cells = Vec::new();
    for perm in permutations(d) {
        let mut current = lower.to_vec();
        let mut vertices = vec![LogOddsPoint::new(current.clone())?];
        for &axis in &perm {
            current[axis] = upper[axis];
            vertices.push(LogOddsPoint::new(current.clone())?);
        }
        cells.push(SimplexCell::new(vertices, 0)?);
    }
    Ok(cells)
}

/// All permutations of `0..d` in lexicographic order.
fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(d), &mut vec![false; d], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64]) -> LogOddsPoint {
        LogOddsPoint::new(c.to_vec()).unwrap()
    }

    fn cv(c: &[u32]) -> CountVector {
        CountVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn logodds_fixtures() {
        let third = SimplexPoint::new(vec![1.0 / 3.0; 3]).unwrap();
        let u = to_logodds(&third).unwrap();
        assert!(u.coords().iter().all(|c| c.abs() < 1e-15));

        let p = SimplexPoint::new(vec![0.5, 0.25, 0.25]).unwrap();
        let u = to_logodds(&p).unwrap();
        assert!((u.coords()[0] - 2f64.ln()).abs() < 1e-15);
        assert!(u.coords()[1].abs() < 1e-15);

        let edge = SimplexPoint::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert!(matches!(to_logodds(&edge), Err(MvcError::BoundaryPoint { index: 2 })));
    }

    #[test]
    fn softmax_fixtures() {
        let p = from_logodds(&lp(&[0.0, 0.0]));
        for x in p.probs() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = from_logodds(&lp(&[2f64.ln(), 0.0]));
        assert!((p.probs()[0] - 0.5).abs() < 1e-15);
        assert!((p.probs()[1] - 0.25).abs() < 1e-15);
        assert!((p.probs()[2] - 0.25).abs() < 1e-15);
        let p = from_logodds(&lp(&[0.0]));
        assert_eq!(p.probs(), &[0.5, 0.5]);
        // Large coordinates must not overflow.
        let p = from_logodds(&lp(&[800.0, -800.0]));
        assert!((p.probs()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn halfspace_fixtures() {
        let t = OutcomeTable::new(8, 3).unwrap();
        let g = halfspace_for(&cv(&[1, 6, 1]), &cv(&[1, 6, 1]), &t).unwrap();
        assert_eq!(g.normal, vec![0.0, 0.0]);
        assert_eq!(g.offset, 0.0);

        let g = halfspace_for(&cv(&[0, 8, 0]), &cv(&[1, 6, 1]), &t).unwrap();
        assert_eq!(g.normal, vec![-1.0, 2.0]);
        assert!((g.offset - 56f64.ln()).abs() < 1e-12);
        let v = g.eval(&[0.3, -0.2]);
        assert!((v - (-0.3 - 0.4 - 56f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn bisect_right_triangle() {
        let cell = SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[1.0, 0.0]), lp(&[0.0, 1.0])], 0).unwrap();
        let (a, b) = bisect(&cell).unwrap();
        assert_eq!(a.vertices(), &[lp(&[0.0, 0.0]), lp(&[1.0, 0.0]), lp(&[0.5, 0.5])]);
        assert_eq!(b.vertices(), &[lp(&[0.0, 0.0]), lp(&[0.5, 0.5]), lp(&[0.0, 1.0])]);
        assert_eq!(a.generation(), 1);
        assert_eq!(b.generation(), 1);
    }

    #[test]
    fn bisect_segment() {
        let cell = SimplexCell::new(vec![lp(&[-1.0]), lp(&[3.0])], 4).unwrap();
        let (a, b) = bisect(&cell).unwrap();
        assert_eq!(a.vertices(), &[lp(&[-1.0]), lp(&[1.0])]);
        assert_eq!(b.vertices(), &[lp(&[1.0]), lp(&[3.0])]);
        assert_eq!(a.generation(), 5);
    }

    #[test]
    fn equal_edges_split_lowest_pair() {
        // Equilateral-ish square corner: edges (0,1) and (1,2) equal, (0,2) longest.
        let cell = SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[1.0, 1.0]), lp(&[2.0, 0.0])], 0).unwrap();
        assert_eq!(longest_edge(&cell), (0, 2));
        let sq = SimplexCell::new(vec![lp(&[0.0]), lp(&[1.0])], 0).unwrap();
        assert_eq!(longest_edge(&sq), (0, 1));
        // Two exactly equal longest edges: (0,1) and (0,2).
        let iso = SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[2.0, 0.0]), lp(&[0.0, 2.0])], 0).unwrap();
        assert_eq!(longest_edge(&iso), (1, 2));
        let tie = SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[2.0, 1.0]), lp(&[2.0, -1.0])], 0).unwrap();
        assert_eq!(longest_edge(&tie), (0, 1));
    }

    #[test]
    fn degenerate_cells_rejected() {
        let flat = vec![lp(&[0.0, 0.0]), lp(&[1.0, 1.0]), lp(&[2.0, 2.0])];
        assert!(matches!(SimplexCell::new(flat, 0), Err(MvcError::DegenerateCell(_))));
        let point = vec![lp(&[1.0]), lp(&[1.0])];
        assert!(SimplexCell::new(point, 0).is_err());
        assert!(SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[1.0, 0.0])], 0).is_err());
    }

    #[test]
    fn classify_extremes() {
        let t = OutcomeTable::new(4, 3).unwrap();
        let hat = cv(&[2, 1, 1]);
        let cell = SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[0.1, 0.0]), lp(&[0.0, 0.1])], 0).unwrap();
        let c = classify_cell(&cell, &hat, &t, 0.0).unwrap();
        let h = t.index_of(&[2, 1, 1]).unwrap();
        assert!(c.in_tail.contains(&h));
        let c = classify_cell(&cell, &hat, &t, DEFAULT_SLACK).unwrap();
        assert!(c.ambiguous.contains(&h));
        let total = c.in_tail.len() + c.out_of_tail.len() + c.ambiguous.len();
        assert_eq!(total, t.len());
        let c = classify_cell(&cell, &hat, &t, f64::INFINITY).unwrap();
        assert_eq!(c.ambiguous.len(), t.len());
    }

    #[test]
    fn kuhn_counts() {
        assert_eq!(kuhn_triangulation(&[0.0], &[1.0]).unwrap().len(), 1);
        let tri = kuhn_triangulation(&[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert_eq!(tri.len(), 2);
        assert_eq!(kuhn_triangulation(&[0.0; 3], &[1.0; 3]).unwrap().len(), 6);
        // Both triangles share the box diagonal.
        assert_eq!(tri[0].vertices()[0], tri[1].vertices()[0]);
        assert_eq!(tri[0].vertices()[2], tri[1].vertices()[2]);
    }

    #[test]
    fn barycentric_roundtrip() {
        let cell = SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[3.0, 0.5]), lp(&[-1.0, 2.0])], 0).unwrap();
        let w = [0.2, 0.5, 0.3];
        let x = cell.combination(&w);
        let back = cell.barycentric(&x).unwrap();
        for (a, b) in w.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
