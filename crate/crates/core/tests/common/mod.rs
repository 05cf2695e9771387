//! Naive reference implementations shared by the integration tests.
//!
//! Everything here works directly in probability space with plain factorials
//! and recursive enumeration, independent of the log-space tables used by
//! the library.

#![allow(dead_code)]

use rand::Rng;

/// All count vectors of length `k` summing to `n`.
pub fn compositions(n: u32, k: usize) -> Vec<Vec<u32>> {
    fn rec(left: u32, slots: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=left {
            prefix.push(c);
            rec(left - c, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Multinomial pmf as a direct product.
pub fn pmf(r: &[u32], p: &[f64]) -> f64 {
    let n: u32 = r.iter().sum();
    let mut v = factorial(n);
    for (&c, &pi) in r.iter().zip(p) {
        v /= factorial(c);
        v *= pi.powi(c as i32);
    }
    v
}

/// `Σ_{q : P(q) ≤ P(r)} P(q)` with a relative tie tolerance.
pub fn p_value(r: &[u32], p: &[f64]) -> f64 {
    let n: u32 = r.iter().sum();
    let target = pmf(r, p);
    let tol = target * 1e-9;
    compositions(n, r.len())
        .iter()
        .map(|q| pmf(q, p))
        .filter(|&v| v <= target + tol)
        .sum::<f64>()
        .min(1.0)
}

/// Same, returning the value both with ties strictly excluded and fully
/// included, to bracket the exact p-value when ties are numerically fragile.
pub fn p_value_bracket(r: &[u32], p: &[f64]) -> (f64, f64) {
    let n: u32 = r.iter().sum();
    let target = pmf(r, p);
    let tol = target * 1e-9 + 1e-300;
    let mut lo = 0.0;
    let mut hi = 0.0;
    for q in compositions(n, r.len()) {
        let v = pmf(&q, p);
        if v < target - tol {
            lo += v;
        }
        if v <= target + tol {
            hi += v;
        }
        if q == r {
            lo += v;
        }
    }
    (lo.min(1.0), hi.min(1.0))
}

pub fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Log-odds with the last category as reference.
pub fn logodds(p: &[f64]) -> Vec<f64> {
    let last = p[p.len() - 1];
    p[..p.len() - 1].iter().map(|x| (x / last).ln()).collect()
}

pub fn softmax(u: &[f64]) -> Vec<f64> {
    let m = u.iter().copied().fold(0.0f64, f64::max);
    let mut e: Vec<f64> = u.iter().map(|x| (x - m).exp()).collect();
    e.push((-m).exp());
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Uniform point on the probability simplex.
pub fn random_simplex_point(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Random count vector with `n` draws from `p`.
pub fn random_counts(rng: &mut impl Rng, n: u32, k: usize) -> Vec<u32> {
    let mut c = vec![0u32; k];
    for _ in 0..n {
        c[rng.random_range(0..k)] += 1;
    }
    c
}
