//! Exact multinomial arithmetic: count vectors, outcome enumeration,
//! log-probabilities and the brute-force exact p-value.
//!
//! Everything here works in the log domain. Log-factorials are summed from
//! `ln i`, never formed from raw factorials, so the table stays finite for any
//! sample size that fits the enumeration budget.
//!
//! Sums over categories are taken in sorted order. That makes the computed
//! log-probability of an outcome a function of the multiset of its
//! `(count, log p)` pairs only, so relabelling categories (or comparing two
//! outcomes that are permutations of each other under a symmetric `p`) yields
//! bit-identical values and exact ties stay exact.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MvcError, Result};

/// Default cap on the number of enumerated outcomes.
pub const DEFAULT_OUTCOME_BUDGET: u128 = 5_000_000;

/// Environment variable overriding [`DEFAULT_OUTCOME_BUDGET`].
pub const OUTCOME_BUDGET_ENV: &str = "MVC_MAX_OUTCOMES";

/// Absolute tolerance on the coordinate sum of a [`SimplexPoint`].
pub const SIMPLEX_SUM_TOLERANCE: f64 = 1e-12;

/// Outcome budget, honouring `MVC_MAX_OUTCOMES` when it parses as a positive integer.
pub fn default_outcome_budget() -> u128 {
    std::env::var(OUTCOME_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u128>().ok())
        .filter(|&b| b > 0)
        .unwrap_or(DEFAULT_OUTCOME_BUDGET)
}

/// An observed outcome: category counts summing to the sample size `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct CountVector {
    counts: Vec<u32>,
    n: u32,
}

impl CountVector {
    pub fn new(counts: Vec<u32>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(MvcError::InvalidDimension(format!(
                "need at least 2 categories, got {}",
                counts.len()
            )));
        }
        let n = counts
            .iter()
            .try_fold(0u32, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| MvcError::InvalidCounts("count total overflows u32".into()))?;
        if n == 0 {
            return Err(MvcError::InvalidCounts("sample size must be positive".into()));
        }
        Ok(Self { counts, n })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// The empirical distribution `r / n`.
    pub fn mle(&self) -> SimplexPoint {
        let n = f64::from(self.n);
        SimplexPoint {
            probs: self.counts.iter().map(|&c| f64::from(c) / n).collect(),
        }
    }

    pub fn has_full_support(&self) -> bool {
        self.counts.iter().all(|&c| c > 0)
    }
}

impl TryFrom<Vec<u32>> for CountVector {
    type Error = MvcError;

    fn try_from(value: Vec<u32>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<CountVector> for Vec<u32> {
    fn from(value: CountVector) -> Self {
        value.counts
    }
}

impl FromStr for CountVector {
    type Err = MvcError;

    /// Parses comma-separated non-negative integers, e.g. `"1,6,1"`.
    fn from_str(s: &str) -> Result<Self> {
        let counts = s
            .split(',')
            .map(|part| {
                let part = part.trim();
                part.parse::<u32>()
                    .map_err(|_| MvcError::InvalidCounts(format!("not a non-negative integer: {part:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts)
    }
}

impl fmt::Display for CountVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(u32::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// A point of the closed probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint {
    probs: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(MvcError::InvalidPoint("empty probability vector".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(MvcError::InvalidPoint(format!("coordinate {bad} outside [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOLERANCE {
            return Err(MvcError::InvalidPoint(format!("coordinates sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Rescales non-negative weights onto the simplex.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MvcError::InvalidPoint("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(MvcError::InvalidPoint("weights sum to zero".into()));
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = MvcError;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(value: SimplexPoint) -> Self {
        value.probs
    }
}

/// `ln i!` for `i = 0..=n`.
#[derive(Debug, Clone)]
pub struct LogFactorials(Vec<f64>);

impl LogFactorials {
    pub fn new(n: u32) -> Self {
        let mut table = Vec::with_capacity(n as usize + 1);
        let mut acc = 0.0f64;
        table.push(0.0);
        for i in 1..=n {
            acc += f64::from(i).ln();
            table.push(acc);
        }
        Self(table)
    }

    pub fn get(&self, i: u32) -> f64 {
        self.0[i as usize]
    }

    /// `ln n! − Σ ln r_i!`, summing the per-category terms in sorted order.
    pub fn log_kappa(&self, counts: &[u32]) -> f64 {
        let n: u32 = counts.iter().sum();
        let mut terms: Vec<f64> = counts.iter().map(|&c| self.get(c)).collect();
        terms.sort_by(f64::total_cmp);
        self.get(n) - terms.iter().sum::<f64>()
    }
}

/// Number of outcomes `C(n+k-1, k-1)`, or `None` on overflow.
pub fn outcome_count(n: u32, k: usize) -> Option<u128> {
    if k == 0 {
        return Some(0);
    }
    binomial(u128::from(n) + k as u128 - 1, k as u128 - 1)
}

pub(crate) fn binomial(top: u128, bottom: u128) -> Option<u128> {
    if bottom > top {
        return Some(0);
    }
    let bottom = bottom.min(top - bottom);
    let mut acc: u128 = 1;
    for i in 0..bottom {
        acc = acc.checked_mul(top - i)? / (i + 1);
    }
    Some(acc)
}

/// Iterates all compositions of `total` into `k` non-negative parts, in
/// reverse lexicographic order: `(total, 0, …, 0)` first, `(0, …, 0, total)` last.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Vec<u32>,
    done: bool,
}

impl Compositions {
    pub fn new(total: u32, k: usize) -> Self {
        let mut current = vec![0; k];
        if let Some(first) = current.first_mut() {
            *first = total;
        }
        Self {
            current,
            done: k == 0,
        }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // Rightmost non-zero part that is not the last one.
        match (0..k.saturating_sub(1)).rev().find(|&j| self.current[j] > 0) {
            Some(j) => {
                let tail: u32 = self.current[j + 1..].iter().sum();
                self.current[j] -= 1;
                self.current[j + 1] = tail + 1;
                for c in &mut self.current[j + 2..] {
                    *c = 0;
                }
            }
            None => self.done = true,
        }
        Some(out)
    }
}

/// Every outcome of `n` draws over `k` categories, with its log multinomial coefficient.
///
/// Immutable after construction; share it freely across threads.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    n: u32,
    k: usize,
    counts: Vec<u32>,
    log_kappa: Vec<f64>,
    index: HashMap<Vec<u32>, usize>,
    log_factorials: LogFactorials,
}

impl OutcomeTable {
    pub fn new(n: u32, k: usize) -> Result<Self> {
        Self::with_budget(n, k, default_outcome_budget())
    }

    pub fn with_budget(n: u32, k: usize, budget: u128) -> Result<Self> {
        if k < 2 {
            return Err(MvcError::InvalidDimension(format!(
                "need at least 2 categories, got {k}"
            )));
        }
        if n == 0 {
            return Err(MvcError::InvalidCounts("sample size must be positive".into()));
        }
        let m = outcome_count(n, k).unwrap_or(u128::MAX);
        if m > budget {
            return Err(MvcError::BudgetExceeded {
                what: "outcome enumeration",
                required: m,
                budget,
            });
        }
        let m = m as usize;
        let log_factorials = LogFactorials::new(n);
        let mut counts = Vec::with_capacity(m * k);
        let mut log_kappa = Vec::with_capacity(m);
        let mut index = HashMap::with_capacity(m);
        for (i, outcome) in Compositions::new(n, k).enumerate() {
            log_kappa.push(log_factorials.log_kappa(&outcome));
            counts.extend_from_slice(&outcome);
            index.insert(outcome, i);
        }
        debug_assert_eq!(log_kappa.len(), m);
        Ok(Self {
            n,
            k,
            counts,
            log_kappa,
            index,
            log_factorials,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of outcomes `m`.
    pub fn len(&self) -> usize {
        self.log_kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_kappa.is_empty()
    }

    pub fn outcome(&self, i: usize) -> &[u32] {
        &self.counts[i * self.k..(i + 1) * self.k]
    }

    pub fn log_kappa(&self, i: usize) -> f64 {
        self.log_kappa[i]
    }

    pub fn log_kappas(&self) -> &[f64] {
        &self.log_kappa
    }

    pub fn log_factorials(&self) -> &LogFactorials {
        &self.log_factorials
    }

    pub fn index_of(&self, counts: &[u32]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.counts.chunks_exact(self.k)
    }

    /// Index of `r` in the table, checking that it was built for the same `(n, k)`.
    pub fn locate(&self, r: &CountVector) -> Result<usize> {
        self.check(r)?;
        self.index_of(r.counts())
            .ok_or_else(|| MvcError::InvalidCounts(format!("outcome {r} not in table")))
    }

    pub(crate) fn check(&self, r: &CountVector) -> Result<()> {
        if r.k() != self.k {
            return Err(MvcError::DimensionMismatch {
                expected: self.k,
                got: r.k(),
            });
        }
        if r.n() != self.n {
            return Err(MvcError::InvalidCounts(format!(
                "outcome sums to {}, table built for n = {}",
                r.n(),
                self.n
            )));
        }
        Ok(())
    }

    /// Log-probabilities of every outcome given `ln p` (entries may be `-inf`).
    pub(crate) fn log_probs_into(&self, ln_p: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let mut terms = Vec::with_capacity(self.k);
        for (i, outcome) in self.outcomes().enumerate() {
            out.push(self.log_kappa[i] + weighted_log_sum(outcome, ln_p, &mut terms));
        }
    }
}

/// `Σ r_i ln p_i` with `0 · ln 0 = 0`, summed in sorted order.
fn weighted_log_sum(counts: &[u32], ln_p: &[f64], terms: &mut Vec<f64>) -> f64 {
    terms.clear();
    for (&c, &lp) in counts.iter().zip(ln_p) {
        if c > 0 {
            if lp == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            terms.push(f64::from(c) * lp);
        }
    }
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// `ln κ(r) = ln n! − Σ ln r_i!`.
pub fn log_kappa(r: &CountVector) -> f64 {
    LogFactorials::new(r.n()).log_kappa(r.counts())
}

/// `ln P_p(r)`; `-inf` exactly when some `p_i = 0` carries a positive count.
pub fn log_prob(r: &CountVector, p: &SimplexPoint) -> Result<f64> {
    if r.k() != p.k() {
        return Err(MvcError::DimensionMismatch {
            expected: r.k(),
            got: p.k(),
        });
    }
    let ln_p: Vec<f64> = p.probs().iter().map(|x| x.ln()).collect();
    let mut terms = Vec::with_capacity(r.k());
    let lw = weighted_log_sum(r.counts(), &ln_p, &mut terms);
    if lw == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_kappa(r) + lw)
}

/// Total mass of outcomes whose log-probability is `<= threshold`, in table order.
pub(crate) fn tail_mass(log_probs: &[f64], threshold: f64) -> f64 {
    let mass: f64 = log_probs
        .iter()
        .filter(|&&lp| lp <= threshold)
        .map(|lp| lp.exp())
        .sum();
    mass.min(1.0)
}

/// Exact p-value `ρ_{r̂}(p)`: the probability under `p` of every outcome no
/// more likely than `r̂` (ties included).
pub fn exact_p_value(r_hat: &CountVector, p: &SimplexPoint, table: &OutcomeTable) -> Result<f64> {
    let hat = table.locate(r_hat)?;
    if p.k() != table.k() {
        return Err(MvcError::DimensionMismatch {
            expected: table.k(),
            got: p.k(),
        });
    }
    let ln_p: Vec<f64> = p.probs().iter().map(|x| x.ln()).collect();
    let mut log_probs = Vec::with_capacity(table.len());
    table.log_probs_into(&ln_p, &mut log_probs);
    Ok(tail_mass(&log_probs, log_probs[hat]))
}
