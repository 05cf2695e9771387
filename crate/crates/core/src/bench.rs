//! Seeded random instances checked against the grid oracle.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{decide_with_faces, DecisionConfig, Verdict};
use crate::error::Result;
use crate::multinomial::CountVector;
use crate::oracle::oracle_max_min_pvalue;

pub const BENCH_ALPHAS: [f64; 4] = [0.05, 0.1, 0.17, 0.3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub count: usize,
    pub n_max: u32,
    pub k: usize,
    pub seed: u64,
    pub tau: f64,
    pub epsilon: f64,
    pub max_cells: usize,
    pub oracle_resolution: u32,
    pub workers: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            count: 100,
            n_max: 10,
            k: 3,
            seed: 42,
            tau: 1e-3,
            epsilon: 1e-3,
            max_cells: 200_000,
            oracle_resolution: 300,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub alpha: f64,
    pub verdict: Verdict,
    pub oracle: f64,
    /// False when the verdict contradicts the oracle.
    pub agrees: bool,
    pub cells: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub instances: usize,
    pub decided: usize,
    pub violations: usize,
    pub agreement_rate: f64,
    pub uncertain_rate: f64,
    pub mean_cells: f64,
    pub cache_hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: BenchSummary,
    /// Not part of the deterministic output.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

/// `n` draws from the uniform categorical distribution.
fn random_outcome(rng: &mut ChaCha8Rng, n: u32, k: usize) -> CountVector {
    let mut counts = vec![0u32; k];
    for _ in 0..n {
        counts[rng.random_range(0..k)] += 1;
    }
    CountVector::new(counts).expect("n > 0")
}

/// Draws `(A, B, α)` triples with a common `n ∈ [1, n_max]`.
pub fn random_instances(count: usize, n_max: u32, k: usize, seed: u64) -> Vec<(CountVector, CountVector, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=n_max.max(1));
            let a = random_outcome(&mut rng, n, k);
            let b = random_outcome(&mut rng, n, k);
            let alpha = BENCH_ALPHAS[rng.random_range(0..BENCH_ALPHAS.len())];
            (a, b, alpha)
        })
        .collect()
}

/// Verdict is consistent with the oracle's grid maximum of `min{ρ_A, ρ_B}`.
pub fn agrees_with_oracle(verdict: Verdict, oracle: f64, alpha: f64) -> bool {
    match verdict {
        Verdict::Intersect => oracle >= alpha,
        Verdict::Disjoint => oracle < alpha,
        Verdict::Uncertain => true,
    }
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    let start = Instant::now();
    let mut rows = Vec::with_capacity(config.count);
    for (a, b, alpha) in random_instances(config.count, config.n_max, config.k, config.seed) {
        let dc = DecisionConfig {
            alpha,
            tau: config.tau,
            epsilon: config.epsilon,
            max_cells: config.max_cells,
            workers: config.workers,
            ..DecisionConfig::default()
        };
        let decision = decide_with_faces(&a, &b, &dc)?;
        let oracle = oracle_max_min_pvalue(&a, &b, config.oracle_resolution)?;
        rows.push(BenchRow {
            a: a.counts().to_vec(),
            b: b.counts().to_vec(),
            alpha,
            verdict: decision.verdict,
            oracle,
            agrees: agrees_with_oracle(decision.verdict, oracle, alpha),
            cells: decision.cells_processed,
            cache_hits: decision.cache.hits,
            cache_misses: decision.cache.misses,
        });
    }
    let summary = summarize(&rows);
    Ok(BenchReport {
        rows,
        summary,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn summarize(rows: &[BenchRow]) -> BenchSummary {
    let instances = rows.len();
    let decided = rows.iter().filter(|r| r.verdict != Verdict::Uncertain).count();
    let violations = rows.iter().filter(|r| !r.agrees).count();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let hits: u64 = rows.iter().map(|r| r.cache_hits).sum();
    let lookups: u64 = rows.iter().map(|r| r.cache_hits + r.cache_misses).sum();
    BenchSummary {
        instances,
        decided,
        violations,
        agreement_rate: if decided == 0 { 1.0 } else { ratio(decided - violations, decided) },
        uncertain_rate: ratio(instances - decided, instances),
        mean_cells: if instances == 0 {
            0.0
        } else {
            rows.iter().map(|r| r.cells as f64).sum::<f64>() / instances as f64
        },
        cache_hit_rate: if lookups == 0 { 0.0 } else { hits as f64 / lookups as f64 },
    }
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>4}  {:<14} {:<14} {:>5}  {:<10} {:>10} {:>8}", "#", "A", "B", "alpha", "verdict", "oracle", "cells");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>4}  {:<14} {:<14} {:>5}  {:<10} {:>10.6} {:>8}{}",
                i,
                join(&r.a),
                join(&r.b),
                r.alpha,
                r.verdict.as_str(),
                r.oracle,
                r.cells,
                if r.agrees { "" } else { "  VIOLATION" }
            );
        }
        let s = &self.summary;
        let _ = writeln!(out, "instances:       {}", s.instances);
        let _ = writeln!(out, "decided:         {}", s.decided);
        let _ = writeln!(out, "violations:      {}", s.violations);
        let _ = writeln!(out, "agreement rate:  {:.4}", s.agreement_rate);
        let _ = writeln!(out, "uncertain rate:  {:.4}", s.uncertain_rate);
        let _ = writeln!(out, "mean cells:      {:.1}", s.mean_cells);
        let _ = writeln!(out, "cache hit rate:  {:.4}", s.cache_hit_rate);
        out
    }
}

fn join(v: &[u32]) -> String {
    v.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}
