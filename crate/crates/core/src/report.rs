//! Serializable run reports.

use serde::{Deserialize, Serialize};

use crate::engine::{Decision, DecisionConfig, FaceSummary, TraceEvent, Verdict};
use crate::multinomial::CountVector;

/// JSON schema describing [`RunReport`].
pub const RUN_REPORT_SCHEMA: &str = include_str!("../schema/run_report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEcho {
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub n: u32,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub alpha: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub max_cells: usize,
    pub slack: f64,
    pub workers: usize,
}

impl From<&DecisionConfig> for ConfigEcho {
    fn from(c: &DecisionConfig) -> Self {
        Self {
            alpha: c.alpha,
            tau: c.tau,
            epsilon: c.epsilon,
            max_cells: c.max_cells,
            slack: c.slack,
            workers: c.workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub cells_processed: u64,
    pub pruned: u64,
    pub unresolved: u64,
    pub budget_exhausted: bool,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub instance: InstanceEcho,
    pub config: ConfigEcho,
    pub verdict: Verdict,
    pub witness: Option<Vec<f64>>,
    pub witness_p_values: Option<[f64; 2]>,
    pub face: Option<Vec<usize>>,
    pub stats: RunStats,
    pub faces: Vec<FaceSummary>,
}

impl RunReport {
    pub fn new(a: &CountVector, b: &CountVector, config: &DecisionConfig, decision: &Decision, wall_time_ms: f64) -> Self {
        Self {
            instance: InstanceEcho {
                a: a.counts().to_vec(),
                b: b.counts().to_vec(),
                n: a.n(),
                k: a.k(),
            },
            config: config.into(),
            verdict: decision.verdict,
            witness: decision.witness.as_ref().map(|w| w.probs().to_vec()),
            witness_p_values: decision.witness_p_values,
            face: decision.face.clone(),
            stats: RunStats {
                cells_processed: decision.cells_processed,
                pruned: decision.pruned,
                unresolved: decision.unresolved_count,
                budget_exhausted: decision.budget_exhausted,
                cache_hits: decision.cache.hits,
                cache_misses: decision.cache.misses,
                wall_time_ms,
            },
            faces: decision.faces.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Human-readable summary.
    pub fn to_text(&self) -> String {
        let fmt_vec = |v: &[f64]| v.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        out.push_str(&format!("verdict: {}\n", self.verdict));
        out.push_str(&format!(
            "instance: A = {:?}, B = {:?} (n = {}, k = {})\n",
            self.instance.a, self.instance.b, self.instance.n, self.instance.k
        ));
        out.push_str(&format!(
            "config: alpha = {}, tau = {}, eps = {}, max cells = {}\n",
            self.config.alpha, self.config.tau, self.config.epsilon, self.config.max_cells
        ));
        if let Some(w) = &self.witness {
            out.push_str(&format!("witness: [{}]\n", fmt_vec(w)));
        }
        if let Some([pa, pb]) = self.witness_p_values {
            out.push_str(&format!("witness p-values: A = {pa:.12}, B = {pb:.12}\n"));
        }
        if let Some(face) = &self.face {
            out.push_str(&format!("face (zeroed categories): {face:?}\n"));
        }
        let s = &self.stats;
        out.push_str(&format!(
            "cells: {} processed, {} pruned, {} unresolved{}\n",
            s.cells_processed,
            s.pruned,
            s.unresolved,
            if s.budget_exhausted { " (budget exhausted)" } else { "" }
        ));
        let total = s.cache_hits + s.cache_misses;
        if total > 0 {
            out.push_str(&format!(
                "vertex cache: {} hits / {} lookups ({:.1}%)\n",
                s.cache_hits,
                total,
                100.0 * s.cache_hits as f64 / total as f64
            ));
        }
        if self.faces.len() > 1 {
            for f in &self.faces {
                out.push_str(&format!(
                    "  face {:?}: {} ({} cells, {} unresolved)\n",
                    f.collapsed, f.verdict, f.cells_processed, f.unresolved_count
                ));
            }
        }
        out
    }
}

/// Trace as JSON lines, one event per line.
pub fn trace_to_jsonl(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("trace event is serializable"));
        out.push('\n');
    }
    out
}
