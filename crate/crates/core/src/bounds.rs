//! Certified per-cell p-value intervals.
//!
//! `ln P(r)` is concave in log-odds coordinates, so over a simplex cell the
//! probability of every outcome is bounded below by its smallest vertex value.
//! Combined with the vertex classification of the tail halfspaces this gives
//!
//! ```text
//! lower = Σ_{r ∈ in-tail ∪ {r̂}} P̲(r)        upper = 1 − Σ_{r ∈ out-of-tail} P̲(r)
//! ```
//!
//! valid at every point of the cell.
//!
//! Cells may additionally be *open* along some axes: the region is then
//! `cell + cone(−e_i : i ∈ open)`. This is only used for categories with a
//! zero count in both observed outcomes, where moving along `−e_i` drives
//! `p_i → 0`. Along such a direction `ln P(r)` is non-decreasing when
//! `r_i = 0`, and tends to `−∞` when `r_i > 0`; the halfspace functional is
//! constant or decreasing respectively. Outcomes of the second kind therefore
//! get `P̲ = 0` and can never be certified out of the tail; everything else is
//! unchanged.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{MvcError, Result};
use crate::geometry::{log_normalizer, LogOddsPoint, SimplexCell};
use crate::multinomial::{CountVector, OutcomeTable};

/// Default number of vertices kept before the cache is flushed.
pub const DEFAULT_CACHE_CAPACITY: usize = 1 << 18;

/// Per-vertex evaluation of every outcome in a table.
#[derive(Debug, Clone)]
pub struct VertexData {
    /// `ln κ(r) + Σ r_i u_i`; differences of these are the halfspace functionals.
    pub linear: Vec<f64>,
    /// `P_{p(u)}(r)`.
    pub probs: Vec<f64>,
}

impl VertexData {
    pub fn compute(table: &OutcomeTable, u: &[f64]) -> Self {
        let n = f64::from(table.n());
        let log_norm = n * log_normalizer(u);
        let mut linear = Vec::with_capacity(table.len());
        let mut probs = Vec::with_capacity(table.len());
        for (i, outcome) in table.outcomes().enumerate() {
            let l = table.log_kappa(i)
                + outcome.iter().zip(u).map(|(&c, &x)| f64::from(c) * x).sum::<f64>();
            linear.push(l);
            probs.push((l - log_norm).exp());
        }
        Self { linear, probs }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
}

impl CacheStats {
    pub fn hit_rate(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

/// Vertex evaluations keyed by the exact bit pattern of the coordinates.
///
/// Sibling cells share midpoints bit-for-bit, so exact keys hit without any
/// tolerance lookup. Values are deterministic; concurrent inserts of the same
/// key are harmless.
#[derive(Debug)]
pub struct VertexProbCache {
    n: u32,
    k: usize,
    capacity: usize,
    map: RwLock<HashMap<Vec<u64>, Arc<VertexData>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl VertexProbCache {
    pub fn new(table: &OutcomeTable) -> Self {
        Self::with_capacity(table, DEFAULT_CACHE_CAPACITY)
    }

    pub fn with_capacity(table: &OutcomeTable, capacity: usize) -> Self {
        Self {
            n: table.n(),
            k: table.k(),
            capacity: capacity.max(1),
            map: RwLock::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    fn check(&self, table: &OutcomeTable) -> Result<()> {
        if self.k != table.k() {
            return Err(MvcError::DimensionMismatch {
                expected: self.k,
                got: table.k(),
            });
        }
        if self.n != table.n() {
            return Err(MvcError::InvalidCounts(format!(
                "cache built for n = {}, table has n = {}",
                self.n,
                table.n()
            )));
        }
        Ok(())
    }

    pub fn get(&self, table: &OutcomeTable, u: &LogOddsPoint) -> Arc<VertexData> {
        let key: Vec<u64> = u.coords().iter().map(|c| c.to_bits()).collect();
        if let Some(hit) = self.map.read().expect("cache lock poisoned").get(&key) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Arc::clone(hit);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let data = Arc::new(VertexData::compute(table, u.coords()));
        let mut map = self.map.write().expect("cache lock poisoned");
        if map.len() >= self.capacity {
            map.clear();
        }
        Arc::clone(map.entry(key).or_insert(data))
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Certified `[lower, upper]` for an exact p-value over a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueInterval {
    pub lower: f64,
    pub upper: f64,
}

impl PValueInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        self.lower - slack <= x && x <= self.upper + slack
    }
}

/// Both intervals plus the bounds on `min{ρ_A, ρ_B}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellBounds {
    pub interval_a: PValueInterval,
    pub interval_b: PValueInterval,
    pub min_lower: f64,
    pub min_upper: f64,
}

impl CellBounds {
    fn from_intervals(interval_a: PValueInterval, interval_b: PValueInterval) -> Self {
        Self {
            interval_a,
            interval_b,
            min_lower: interval_a.lower.min(interval_b.lower),
            min_upper: interval_a.upper.min(interval_b.upper),
        }
    }
}

/// Vertex data of one cell plus the per-outcome probability lower bounds.
pub(crate) struct CellEvaluation {
    vertices: Vec<Arc<VertexData>>,
    min_prob: Vec<f64>,
    /// Outcome has positive count on an open axis.
    unbounded: Vec<bool>,
}

impl CellEvaluation {
    pub(crate) fn new(cell: &SimplexCell, open_axes: &[usize], table: &OutcomeTable, cache: &VertexProbCache) -> Self {
        let vertices: Vec<Arc<VertexData>> = cell.vertices().iter().map(|w| cache.get(table, w)).collect();
        let mut min_prob = Vec::with_capacity(table.len());
        let mut unbounded = Vec::with_capacity(table.len());
        for (r, outcome) in table.outcomes().enumerate() {
            let open = open_axes.iter().any(|&i| outcome[i] > 0);
            unbounded.push(open);
            min_prob.push(if open {
                0.0
            } else {
                vertices.iter().map(|v| v.probs[r]).fold(f64::INFINITY, f64::min)
            });
        }
        Self {
            vertices,
            min_prob,
            unbounded,
        }
    }

    pub(crate) fn interval(&self, hat: usize, slack: f64) -> PValueInterval {
        let mut lower = 0.0;
        let mut excluded = 0.0;
        for r in 0..self.min_prob.len() {
            if r == hat {
                lower += self.min_prob[r];
                continue;
            }
            let (lo, hi) = self.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let g = v.linear[r] - v.linear[hat];
                (lo.min(g), hi.max(g))
            });
            if hi <= -slack {
                lower += self.min_prob[r];
            } else if lo > slack && !self.unbounded[r] {
                excluded += self.min_prob[r];
            }
        }
        debug_assert!((-1e-10..=1.0 + 1e-10).contains(&lower), "lower sum {lower}");
        debug_assert!((-1e-10..=1.0 + 1e-10).contains(&excluded), "excluded sum {excluded}");
        let lower = lower.clamp(0.0, 1.0);
        let upper = (1.0 - excluded).clamp(0.0, 1.0).max(lower);
        PValueInterval { lower, upper }
    }

    pub(crate) fn min_prob(&self, r: usize) -> f64 {
        self.min_prob[r]
    }
}

fn check_cell(cell: &SimplexCell, table: &OutcomeTable, cache: &VertexProbCache) -> Result<()> {
    cache.check(table)?;
    if cell.dim() + 1 != table.k() {
        return Err(MvcError::DimensionMismatch {
            expected: table.k() - 1,
            got: cell.dim(),
        });
    }
    Ok(())
}

fn check_open_axes(open_axes: &[usize], table: &OutcomeTable, hats: &[usize]) -> Result<()> {
    for &axis in open_axes {
        if axis + 1 >= table.k() {
            return Err(MvcError::InvalidDimension(format!("open axis {axis} out of range")));
        }
        if hats.iter().any(|&h| table.outcome(h)[axis] > 0) {
            return Err(MvcError::InvalidCounts(format!(
                "axis {axis} can only be open when the observed counts on it are zero"
            )));
        }
    }
    Ok(())
}

/// `P̲(r) = min_j P_{p(w_j)}(r)`.
pub fn vertex_min_prob(cell: &SimplexCell, r: &CountVector, table: &OutcomeTable, cache: &VertexProbCache) -> Result<f64> {
    check_cell(cell, table, cache)?;
    let idx = table.locate(r)?;
    Ok(CellEvaluation::new(cell, &[], table, cache).min_prob(idx))
}

pub fn pvalue_interval(
    cell: &SimplexCell,
    r_hat: &CountVector,
    table: &OutcomeTable,
    cache: &VertexProbCache,
    slack: f64,
) -> Result<PValueInterval> {
    pvalue_interval_open(cell, &[], r_hat, table, cache, slack)
}

/// As [`pvalue_interval`], over `cell + cone(−e_i : i ∈ open_axes)`.
pub fn pvalue_interval_open(
    cell: &SimplexCell,
    open_axes: &[usize],
    r_hat: &CountVector,
    table: &OutcomeTable,
    cache: &VertexProbCache,
    slack: f64,
) -> Result<PValueInterval> {
    check_cell(cell, table, cache)?;
    let hat = table.locate(r_hat)?;
    check_open_axes(open_axes, table, &[hat])?;
    Ok(CellEvaluation::new(cell, open_axes, table, cache).interval(hat, slack))
}

pub fn cell_bounds(
    cell: &SimplexCell,
    r_a: &CountVector,
    r_b: &CountVector,
    table: &OutcomeTable,
    cache: &VertexProbCache,
    slack: f64,
) -> Result<CellBounds> {
    cell_bounds_open(cell, &[], r_a, r_b, table, cache, slack)
}

pub fn cell_bounds_open(
    cell: &SimplexCell,
    open_axes: &[usize],
    r_a: &CountVector,
    r_b: &CountVector,
    table: &OutcomeTable,
    cache: &VertexProbCache,
    slack: f64,
) -> Result<CellBounds> {
    check_cell(cell, table, cache)?;
    let a = table.locate(r_a)?;
    let b = table.locate(r_b)?;
    check_open_axes(open_axes, table, &[a, b])?;
    Ok(bounds_by_index(cell, open_axes, a, b, table, cache, slack))
}

pub(crate) fn bounds_by_index(
    cell: &SimplexCell,
    open_axes: &[usize],
    a: usize,
    b: usize,
    table: &OutcomeTable,
    cache: &VertexProbCache,
    slack: f64,
) -> CellBounds {
    let eval = CellEvaluation::new(cell, open_axes, table, cache);
    let ia = eval.interval(a, slack);
    let ib = if a == b { ia } else { eval.interval(b, slack) };
    CellBounds::from_intervals(ia, ib)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DEFAULT_SLACK;

    fn lp(c: &[f64]) -> LogOddsPoint {
        LogOddsPoint::new(c.to_vec()).unwrap()
    }

    fn cv(c: &[u32]) -> CountVector {
        CountVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn segment_vertex_min() {
        let t = OutcomeTable::new(2, 2).unwrap();
        let cache = VertexProbCache::new(&t);
        let cell = SimplexCell::new(vec![lp(&[0.0]), lp(&[3f64.ln()])], 0).unwrap();
        let v = vertex_min_prob(&cell, &cv(&[2, 0]), &t, &cache).unwrap();
        assert!((v - 0.25).abs() < 1e-15, "{v}");
        let w = vertex_min_prob(&cell, &cv(&[0, 2]), &t, &cache).unwrap();
        assert!((w - 0.0625).abs() < 1e-15, "{w}");
    }

    #[test]
    fn degenerate_cell_vertex_min_is_vertex_value() {
        let t = OutcomeTable::new(5, 3).unwrap();
        let cache = VertexProbCache::new(&t);
        let w = lp(&[0.3, -0.7]);
        let cell = SimplexCell::new_unchecked(vec![w.clone(), w.clone(), w.clone()], 0);
        let r = cv(&[2, 1, 2]);
        let direct = crate::multinomial::log_prob(&r, &crate::geometry::from_logodds(&w)).unwrap().exp();
        let v = vertex_min_prob(&cell, &r, &t, &cache).unwrap();
        assert!((v - direct).abs() < 1e-14);
    }

    #[test]
    fn empty_out_of_tail_gives_unit_upper() {
        // r̂ = (2,0) is the most likely outcome near p = (0.9, 0.1): every outcome is in the tail.
        let t = OutcomeTable::new(2, 2).unwrap();
        let cache = VertexProbCache::new(&t);
        let cell = SimplexCell::new(vec![lp(&[2.0]), lp(&[2.2])], 0).unwrap();
        let iv = pvalue_interval(&cell, &cv(&[2, 0]), &t, &cache, DEFAULT_SLACK).unwrap();
        assert_eq!(iv.upper, 1.0);
        let expected: f64 = [[2, 0], [1, 1], [0, 2]]
            .iter()
            .map(|r| vertex_min_prob(&cell, &cv(r), &t, &cache).unwrap())
            .sum();
        assert!((iv.lower - expected).abs() < 1e-15);
    }

    #[test]
    fn minimal_tail_lower_bound_is_hat_mass() {
        // r̂ = (0,2) at p ≈ (0.9, 0.1) is the least likely outcome: nothing else is in the tail.
        let t = OutcomeTable::new(2, 2).unwrap();
        let cache = VertexProbCache::new(&t);
        let cell = SimplexCell::new(vec![lp(&[2.0]), lp(&[2.2])], 0).unwrap();
        let iv = pvalue_interval(&cell, &cv(&[0, 2]), &t, &cache, DEFAULT_SLACK).unwrap();
        let hat = vertex_min_prob(&cell, &cv(&[0, 2]), &t, &cache).unwrap();
        assert_eq!(iv.lower, hat);
        let others = vertex_min_prob(&cell, &cv(&[2, 0]), &t, &cache).unwrap()
            + vertex_min_prob(&cell, &cv(&[1, 1]), &t, &cache).unwrap();
        assert!((iv.upper - (1.0 - others)).abs() < 1e-15);
    }

    #[test]
    fn identical_outcomes_give_identical_intervals() {
        let t = OutcomeTable::new(8, 3).unwrap();
        let cache = VertexProbCache::new(&t);
        let cell = SimplexCell::new(vec![lp(&[0.0, 1.5]), lp(&[0.2, 1.5]), lp(&[0.0, 1.8])], 0).unwrap();
        let r = cv(&[1, 6, 1]);
        let b = cell_bounds(&cell, &r, &r, &t, &cache, DEFAULT_SLACK).unwrap();
        assert_eq!(b.interval_a, b.interval_b);
        assert_eq!(b.min_lower, b.interval_a.lower);
        assert_eq!(b.min_upper, b.interval_a.upper);
    }

    #[test]
    fn cache_hits_on_shared_vertices() {
        let t = OutcomeTable::new(4, 3).unwrap();
        let cache = VertexProbCache::new(&t);
        let cell = SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[1.0, 0.0]), lp(&[0.0, 1.0])], 0).unwrap();
        let (c1, c2) = crate::geometry::bisect(&cell).unwrap();
        let r = cv(&[2, 1, 1]);
        pvalue_interval(&c1, &r, &t, &cache, DEFAULT_SLACK).unwrap();
        pvalue_interval(&c2, &r, &t, &cache, DEFAULT_SLACK).unwrap();
        let s = cache.stats();
        assert_eq!(s.misses, 4);
        assert_eq!(s.hits, 2);
        assert_eq!(cache.len(), 4);
    }

    #[test]
    fn cache_rejects_foreign_table() {
        let t = OutcomeTable::new(4, 3).unwrap();
        let other = OutcomeTable::new(5, 3).unwrap();
        let cache = VertexProbCache::new(&t);
        let cell = SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[1.0, 0.0]), lp(&[0.0, 1.0])], 0).unwrap();
        assert!(pvalue_interval(&cell, &cv(&[2, 2, 1]), &other, &cache, DEFAULT_SLACK).is_err());
    }

    #[test]
    fn open_axis_requires_zero_observed_count() {
        let t = OutcomeTable::new(4, 3).unwrap();
        let cache = VertexProbCache::new(&t);
        let cell = SimplexCell::new(vec![lp(&[0.0, 0.0]), lp(&[1.0, 0.0]), lp(&[0.0, 1.0])], 0).unwrap();
        assert!(pvalue_interval_open(&cell, &[1], &cv(&[3, 0, 1]), &t, &cache, DEFAULT_SLACK).is_ok());
        assert!(pvalue_interval_open(&cell, &[0], &cv(&[3, 0, 1]), &t, &cache, DEFAULT_SLACK).is_err());
        assert!(pvalue_interval_open(&cell, &[2], &cv(&[3, 0, 1]), &t, &cache, DEFAULT_SLACK).is_err());
    }
}
