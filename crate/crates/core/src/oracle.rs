//! Dense-grid brute force for `max_p min{ρ_A(p), ρ_B(p)}`.
//!
//! Walks the barycentric grid `{c / R : c ∈ ℕ^k, Σ c = R}`, faces included,
//! and evaluates both exact p-values at every node. The result is a lower
//! bound on the true maximum; it never touches log-odds coordinates or cell
//! bounds, so it can referee the certified engine.

use rayon::prelude::*;

use crate::error::{MvcError, Result};
use crate::multinomial::{outcome_count, tail_mass, Compositions, CountVector, OutcomeTable, SimplexPoint};

/// Maximum number of grid nodes the oracle will visit.
pub const GRID_NODE_BUDGET: u128 = 20_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMax {
    pub value: f64,
    /// Grid node attaining `value` (first in enumeration order on ties).
    pub point: SimplexPoint,
}

/// Maximum over the grid of `min{ρ_A, ρ_B}`.
pub fn oracle_max_min_pvalue(r_a: &CountVector, r_b: &CountVector, grid_resolution: u32) -> Result<f64> {
    oracle_max_min(r_a, r_b, grid_resolution).map(|m| m.value)
}

pub fn oracle_max_min(r_a: &CountVector, r_b: &CountVector, grid_resolution: u32) -> Result<OracleMax> {
    if r_a.k() != r_b.k() {
        return Err(MvcError::DimensionMismatch {
            expected: r_a.k(),
            got: r_b.k(),
        });
    }
    if r_a.n() != r_b.n() {
        return Err(MvcError::InvalidCounts(format!(
            "outcomes have different sample sizes ({} vs {})",
            r_a.n(),
            r_b.n()
        )));
    }
    if grid_resolution == 0 {
        return Err(MvcError::InvalidDimension("grid resolution must be positive".into()));
    }
    let k = r_a.k();
    let nodes = outcome_count(grid_resolution, k).unwrap_or(u128::MAX);
    if nodes > GRID_NODE_BUDGET {
        return Err(MvcError::BudgetExceeded {
            what: "oracle grid",
            required: nodes,
            budget: GRID_NODE_BUDGET,
        });
    }
    let table = OutcomeTable::new(r_a.n(), k)?;
    let ia = table.locate(r_a)?;
    let ib = table.locate(r_b)?;
    let res = f64::from(grid_resolution);
    let ln_grid: Vec<f64> = (0..=grid_resolution).map(|i| (f64::from(i) / res).ln()).collect();

    // Parallel over the first coordinate; each task walks its slab in order.
    let best = (0..=grid_resolution)
        .into_par_iter()
        .map(|first| {
            let mut log_probs = Vec::with_capacity(table.len());
            let mut ln_p = vec![0.0; k];
            let mut best: Option<(f64, Vec<u32>)> = None;
            for rest in Compositions::new(grid_resolution - first, k - 1) {
                ln_p[0] = ln_grid[first as usize];
                for (slot, &c) in ln_p[1..].iter_mut().zip(&rest) {
                    *slot = ln_grid[c as usize];
                }
                table.log_probs_into(&ln_p, &mut log_probs);
                let rho_a = tail_mass(&log_probs, log_probs[ia]);
                if best.as_ref().is_some_and(|b| rho_a <= b.0) {
                    continue;
                }
                let value = rho_a.min(tail_mass(&log_probs, log_probs[ib]));
                if best.as_ref().is_none_or(|b| value > b.0) {
                    let mut node = Vec::with_capacity(k);
                    node.push(first);
                    node.extend_from_slice(&rest);
                    best = Some((value, node));
                }
            }
            best
        })
        .reduce(
            || None,
            |x, y| match (x, y) {
                (Some(a), Some(b)) => {
                    // Larger value wins; ties go to the earlier node (lexicographically larger).
                    if b.0 > a.0 || (b.0 == a.0 && b.1 > a.1) {
                        Some(b)
                    } else {
                        Some(a)
                    }
                }
                (a, None) => a,
                (None, b) => b,
            },
        )
        .expect("grid has at least one node");

    let point = SimplexPoint::from_raw(best.1.iter().map(|&c| f64::from(c) / res).collect());
    Ok(OracleMax { value: best.0, point })
}
