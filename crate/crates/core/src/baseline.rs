//! Asymptotic likelihood-ratio (Wilks) confidence regions.
//!
//! `{p : G²(p) ≤ χ²_{k−1, 1−α}}` with `G²(p) = 2 Σ n_i ln(n_i / (n p_i))`.
//! This is the large-sample approximation; it is not certified and can
//! disagree with the exact regions at small `n`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_lr;

use crate::error::{MvcError, Result};
use crate::multinomial::{outcome_count, Compositions, CountVector, SimplexPoint};
use crate::oracle::GRID_NODE_BUDGET;

pub const QUANTILE_TOLERANCE: f64 = 1e-10;

/// Chi-square CDF with `df` degrees of freedom.
pub fn chisq_cdf(df: u32, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(0.5 * f64::from(df), 0.5 * x)
    }
}

/// Inverse chi-square CDF by bisection to [`QUANTILE_TOLERANCE`].
///
/// `prob` is clamped to `[0, 1]`; `prob = 0` gives `0` and `prob = 1` gives `+∞`.
pub fn chisq_quantile(df: u32, prob: f64) -> f64 {
    assert!(df >= 1, "chi-square needs at least one degree of freedom");
    if !(prob > 0.0) {
        return 0.0;
    }
    if prob >= 1.0 {
        return f64::INFINITY;
    }
    let mut lo = 0.0;
    let mut hi = f64::from(df).max(1.0);
    while chisq_cdf(df, hi) < prob {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > QUANTILE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if chisq_cdf(df, mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Likelihood-ratio statistic; `+∞` when `p_i = 0` for an observed category.
pub fn g_squared(outcome: &CountVector, p: &SimplexPoint) -> Result<f64> {
    if outcome.k() != p.k() {
        return Err(MvcError::DimensionMismatch {
            expected: outcome.k(),
            got: p.k(),
        });
    }
    let n = f64::from(outcome.n());
    let mut g = 0.0;
    for (&c, &pi) in outcome.counts().iter().zip(p.probs()) {
        if c == 0 {
            continue;
        }
        if pi <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let c = f64::from(c);
        g += c * (c / (n * pi)).ln();
    }
    Ok((2.0 * g).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilksRegion {
    pub outcome: CountVector,
    pub alpha: f64,
    /// `χ²_{k−1}` quantile at `1 − α`.
    pub threshold: f64,
}

impl WilksRegion {
    pub fn new(outcome: CountVector, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MvcError::InvalidTolerance(format!("alpha = {alpha} is outside (0, 1)")));
        }
        let df = (outcome.k() - 1) as u32;
        let threshold = chisq_quantile(df, 1.0 - alpha);
        Ok(Self {
            outcome,
            alpha,
            threshold,
        })
    }

    pub fn contains(&self, p: &SimplexPoint) -> bool {
        wilks_member(self, p)
    }
}

pub fn wilks_member(region: &WilksRegion, p: &SimplexPoint) -> bool {
    g_squared(&region.outcome, p).is_ok_and(|g| g <= region.threshold)
}

/// Grid scan for a point inside both Wilks regions.
///
/// Not certified: a thin intersection can fall between grid nodes.
pub fn wilks_intersect(r_a: &CountVector, r_b: &CountVector, alpha: f64, grid_resolution: u32) -> Result<bool> {
    if r_a.k() != r_b.k() {
        return Err(MvcError::DimensionMismatch {
            expected: r_a.k(),
            got: r_b.k(),
        });
    }
    if grid_resolution == 0 {
        return Err(MvcError::InvalidDimension("grid resolution must be positive".into()));
    }
    let k = r_a.k();
    let nodes = outcome_count(grid_resolution, k).unwrap_or(u128::MAX);
    if nodes > GRID_NODE_BUDGET {
        return Err(MvcError::BudgetExceeded {
            what: "Wilks grid",
            required: nodes,
            budget: GRID_NODE_BUDGET,
        });
    }
    let a = WilksRegion::new(r_a.clone(), alpha)?;
    let b = WilksRegion::new(r_b.clone(), alpha)?;
    let res = f64::from(grid_resolution);
    Ok((0..=grid_resolution).into_par_iter().any(|first| {
        Compositions::new(grid_resolution - first, k - 1).any(|rest| {
            let probs: Vec<f64> = std::iter::once(first)
                .chain(rest)
                .map(|c| f64::from(c) / res)
                .collect();
            let p = SimplexPoint::from_raw(probs);
            a.contains(&p) && b.contains(&p)
        })
    }))
}
