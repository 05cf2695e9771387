//! Compact search box in log-odds coordinates.
//!
//! Since `ρ(p) ≤ m · P(r̂)`, any point where both p-values reach `α − τ` lies in
//! the intersection of the superlevel sets `{P_A ≥ t}` and `{P_B ≥ t}` with
//! `t = (α − τ) / m`. The box built here is an outer bound of that
//! intersection, so everything outside it can be discarded.
//!
//! The last category is the reference (`u_i = ln(p_i / p_last)`) and must have
//! a positive count in at least one outcome. Categories with zero count in
//! both outcomes leave the superlevel sets unbounded towards `u_i → −∞`; those
//! axes are reported as *open* and get an artificial lower cutoff (see
//! [`SearchDomain::open_axes`]).

use serde::{Deserialize, Serialize};

use crate::error::{MvcError, Result};
use crate::geometry::{log_normalizer, LogOddsPoint};
use crate::multinomial::{CountVector, LogFactorials, OutcomeTable};

/// Outward padding applied to every box bound.
pub const DOMAIN_PADDING: f64 = 1e-6;

/// Absolute tolerance of the endpoint bisection.
pub const ENDPOINT_TOLERANCE: f64 = 1e-9;

/// The threshold is lowered by this much (in log space) before any interval is
/// computed, so rounding in `ln P` can only enlarge the box.
const LOG_THRESHOLD_MARGIN: f64 = 1e-9;

const MAX_BRACKET: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `t = (α − τ) / m`.
    pub threshold: f64,
    /// Axes whose category is zero in both outcomes. The true region extends
    /// below `lower` along these axes; the cutoff is chosen so the mass of
    /// outcomes touching such a category is at most `τ / 4` beyond it.
    pub open_axes: Vec<usize>,
}

impl SearchDomain {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter().enumerate().all(|(i, &x)| {
                x <= self.upper[i] && (x >= self.lower[i] || self.open_axes.contains(&i))
            })
    }

    pub fn center(&self) -> LogOddsPoint {
        LogOddsPoint::new(self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect())
            .expect("finite box")
    }
}

pub fn superlevel_threshold(alpha: f64, tau: f64, m: u128) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MvcError::InvalidTolerance(format!("alpha = {alpha} is outside (0, 1)")));
    }
    if !(tau > 0.0) || tau >= alpha || tau >= 1.0 - alpha {
        return Err(MvcError::InvalidTolerance(format!(
            "tau = {tau} must satisfy 0 < tau < min(alpha, 1 - alpha)"
        )));
    }
    if m == 0 {
        return Err(MvcError::InvalidDimension("outcome count must be positive".into()));
    }
    Ok((alpha - tau) / m as f64)
}

fn check_axis(r_hat: &CountVector, axis: usize, fixed: &LogOddsPoint) -> Result<()> {
    if fixed.dim() + 1 != r_hat.k() {
        return Err(MvcError::DimensionMismatch {
            expected: r_hat.k() - 1,
            got: fixed.dim(),
        });
    }
    if axis >= fixed.dim() {
        return Err(MvcError::InvalidDimension(format!("axis {axis} out of range")));
    }
    Ok(())
}

/// Maximizer of `ln P` along coordinate `axis` with the other coordinates of
/// `fixed` held constant (the `axis` entry of `fixed` is ignored).
///
/// Stationarity gives `p_axis = r̂_axis / n`, i.e.
/// `u* = ln r̂_axis − ln(n − r̂_axis) + ln(1 + Σ_{j≠axis} e^{u_j})`.
pub fn slice_maximizer(r_hat: &CountVector, axis: usize, fixed: &LogOddsPoint) -> Result<f64> {
    check_axis(r_hat, axis, fixed)?;
    let count = r_hat.counts()[axis];
    let n = r_hat.n();
    if count == 0 || count == n {
        return Err(MvcError::DegenerateSlice { axis, count, n });
    }
    let others: Vec<f64> = fixed
        .coords()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != axis)
        .map(|(_, &x)| x)
        .collect();
    Ok(f64::from(count).ln() - f64::from(n - count).ln() + log_normalizer(&others))
}

/// Interval of `u_axis` where `ln P ≥ log_t`, other coordinates fixed.
///
/// Endpoints are bisected to [`ENDPOINT_TOLERANCE`] and returned on the
/// outer side. When the count on `axis` is `0` (resp. `n`) the slice is
/// monotone and the interval is unbounded below (resp. above).
pub fn superlevel_slice(r_hat: &CountVector, axis: usize, fixed: &LogOddsPoint, log_t: f64) -> Option<(f64, f64)> {
    check_axis(r_hat, axis, fixed).ok()?;
    let lf = LogFactorials::new(r_hat.n());
    let log_kappa = lf.log_kappa(r_hat.counts());
    let counts = r_hat.counts();
    let n = f64::from(r_hat.n());
    let mut u = fixed.coords().to_vec();
    let mut f = move |x: f64| {
        u[axis] = x;
        log_kappa + counts.iter().zip(&u).map(|(&c, &v)| f64::from(c) * v).sum::<f64>() - n * log_normalizer(&u)
    };
    match slice_maximizer(r_hat, axis, fixed) {
        Ok(center) => {
            let peak = f(center);
            if !(peak >= log_t) {
                return None;
            }
            if peak == log_t {
                return Some((center - ENDPOINT_TOLERANCE, center + ENDPOINT_TOLERANCE));
            }
            Some((
                outer_endpoint(&mut f, center, -1.0, log_t),
                outer_endpoint(&mut f, center, 1.0, log_t),
            ))
        }
        Err(_) => {
            // Monotone slice: decreasing when the count is zero, increasing when it is n.
            let increasing = counts[axis] > 0;
            let dir = if increasing { -1.0 } else { 1.0 };
            // Find some point inside the superlevel set by walking towards the supremum.
            let mut x = 0.0;
            let mut step = 1.0;
            while !(f(x) >= log_t) {
                x -= dir * step;
                step *= 2.0;
                if step > MAX_BRACKET {
                    return None;
                }
            }
            let end = outer_endpoint(&mut f, x, dir, log_t);
            Some(if increasing {
                (end, f64::INFINITY)
            } else {
                (f64::NEG_INFINITY, end)
            })
        }
    }
}

/// Walks from `inside` (where `f ≥ log_t`) in direction `dir` until `f` drops
/// below `log_t`, then bisects. Returns the outer endpoint, or ±∞ if the walk
/// never leaves the superlevel set.
fn outer_endpoint(f: &mut impl FnMut(f64) -> f64, inside: f64, dir: f64, log_t: f64) -> f64 {
    let mut step = 1.0;
    let mut outside = inside + dir * step;
    let mut inner = inside;
    while f(outside) >= log_t {
        inner = outside;
        step *= 2.0;
        if step > MAX_BRACKET {
            return dir * f64::INFINITY;
        }
        outside = inside + dir * step;
    }
    while (outside - inner).abs() > ENDPOINT_TOLERANCE {
        let mid = 0.5 * (inner + outside);
        if mid == inner || mid == outside {
            break;
        }
        if f(mid) >= log_t {
            inner = mid;
        } else {
            outside = mid;
        }
    }
    outside
}

fn ln_sigmoid(x: f64) -> f64 {
    -log_normalizer(&[-x])
}

fn xlogx_over(x: f64, n: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / n).ln()
    }
}

/// Projection of `{u : ln P_X(u) ≥ log_t}` onto axis `a`.
///
/// With `u_a` fixed, the remaining coordinates maximize `ln P` at
/// `p_j = x_j / n` for `j ∉ {a, ref}` and `p_a + p_ref = (x_a + x_ref) / n`,
/// which yields the concave profile
/// `φ(u) = c + x_a ln σ(u) + x_ref ln σ(−u)`. Its superlevel interval is the
/// exact shadow of the superlevel set on this axis.
fn profile_interval(counts: &[u32], log_kappa: f64, axis: usize, log_t: f64) -> Option<(f64, f64)> {
    let k = counts.len();
    let n: f64 = counts.iter().map(|&c| f64::from(c)).sum();
    let xa = f64::from(counts[axis]);
    let xr = f64::from(counts[k - 1]);
    let rest: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != axis && j != k - 1)
        .map(|(_, &c)| xlogx_over(f64::from(c), n))
        .sum();
    let c = log_kappa + rest + xlogx_over(xa + xr, n);
    let mut phi = |u: f64| c + xa * ln_sigmoid(u) + xr * ln_sigmoid(-u);
    let peak = log_kappa + counts.iter().map(|&x| xlogx_over(f64::from(x), n)).sum::<f64>();
    if peak < log_t {
        return None;
    }
    match (xa > 0.0, xr > 0.0) {
        (true, true) => {
            let center = (xa / xr).ln();
            Some((
                outer_endpoint(&mut phi, center, -1.0, log_t),
                outer_endpoint(&mut phi, center, 1.0, log_t),
            ))
        }
        (true, false) | (false, true) => {
            // Monotone: the supremum `peak` is approached at ±∞.
            let dir = if xa > 0.0 { -1.0 } else { 1.0 };
            let mut x = 0.0;
            let mut step = 1.0;
            while phi(x) < log_t {
                x -= dir * step;
                step *= 2.0;
                if step > MAX_BRACKET {
                    return Some((f64::NEG_INFINITY, f64::INFINITY));
                }
            }
            let end = outer_endpoint(&mut phi, x, dir, log_t);
            Some(if xa > 0.0 {
                (end, f64::INFINITY)
            } else {
                (f64::NEG_INFINITY, end)
            })
        }
        (false, false) => Some((f64::NEG_INFINITY, f64::INFINITY)),
    }
}

/// Loose outer box from `P_X ≥ t ⇒ p_j ≥ (t/κ)^{1/x_j}` for every `x_j > 0`.
fn loose_box(counts: &[u32], log_kappa: f64, log_t: f64) -> Option<Vec<(f64, f64)>> {
    let k = counts.len();
    // ln of the per-category lower bounds (−∞ where the count is zero).
    let log_floor: Vec<f64> = counts
        .iter()
        .map(|&x| {
            if x == 0 {
                f64::NEG_INFINITY
            } else {
                ((log_t - log_kappa) / f64::from(x)).min(0.0)
            }
        })
        .collect();
    let floor_sum: f64 = log_floor.iter().map(|l| l.exp()).sum();
    if floor_sum > 1.0 + 1e-12 {
        return None;
    }
    let log_ceiling = |j: usize| (1.0 - (floor_sum - log_floor[j].exp())).max(0.0).ln();
    Some(
        (0..k - 1)
            .map(|a| (log_floor[a] - log_ceiling(k - 1), log_ceiling(a) - log_floor[k - 1]))
            .collect(),
    )
}

/// Per-axis outer bounds of `{u : ln P_r(u) ≥ log_t}` (last category as
/// reference); `None` when the set is empty. Bounds may be infinite.
pub fn superlevel_box(r: &CountVector, log_t: f64) -> Option<Vec<(f64, f64)>> {
    let log_kappa = crate::multinomial::log_kappa(r);
    let mut bounds = loose_box(r.counts(), log_kappa, log_t)?;
    for (axis, b) in bounds.iter_mut().enumerate() {
        let (lo, hi) = profile_interval(r.counts(), log_kappa, axis, log_t)?;
        b.0 = b.0.max(lo);
        b.1 = b.1.min(hi);
    }
    Some(bounds)
}

/// Builds the search box for outcomes `r_a`, `r_b`.
///
/// `m` is taken from `table` (the number of outcomes of the same `(n, k)`).
/// Returns [`MvcError::EmptyDomain`] when the two superlevel sets have
/// disjoint shadows, which certifies `max min{ρ_A, ρ_B} < α − τ`.
pub fn build_domain(
    r_a: &CountVector,
    r_b: &CountVector,
    alpha: f64,
    tau: f64,
    table: &OutcomeTable,
) -> Result<SearchDomain> {
    table.check(r_a)?;
    table.check(r_b)?;
    let k = table.k();
    if r_a.counts()[k - 1] == 0 && r_b.counts()[k - 1] == 0 {
        return Err(MvcError::InvalidCounts(
            "the reference (last) category must be observed in at least one outcome".into(),
        ));
    }
    let threshold = superlevel_threshold(alpha, tau, table.len() as u128)?;
    let log_t = threshold.ln() - LOG_THRESHOLD_MARGIN;

    let box_a = superlevel_box(r_a, log_t).ok_or(MvcError::EmptyDomain)?;
    let box_b = superlevel_box(r_b, log_t).ok_or(MvcError::EmptyDomain)?;

    let open_axes: Vec<usize> = (0..k - 1)
        .filter(|&i| r_a.counts()[i] == 0 && r_b.counts()[i] == 0)
        .collect();
    let n = f64::from(table.n());
    let cutoff = (tau / (4.0 * n * open_axes.len().max(1) as f64)).ln();

    let mut lower = Vec::with_capacity(k - 1);
    let mut upper = Vec::with_capacity(k - 1);
    for axis in 0..k - 1 {
        let lo = box_a[axis].0.max(box_b[axis].0);
        let hi = box_a[axis].1.min(box_b[axis].1);
        if lo > hi {
            return Err(MvcError::EmptyDomain);
        }
        let hi = hi + DOMAIN_PADDING;
        let lo = if open_axes.contains(&axis) {
            debug_assert!(lo == f64::NEG_INFINITY);
            cutoff.min(hi - 1.0)
        } else {
            lo - DOMAIN_PADDING
        };
        if !lo.is_finite() || !hi.is_finite() {
            return Err(MvcError::InvalidCounts(format!("search box is unbounded along axis {axis}")));
        }
        lower.push(lo);
        upper.push(hi);
    }
    Ok(SearchDomain {
        lower,
        upper,
        threshold,
        open_axes,
    })
}
