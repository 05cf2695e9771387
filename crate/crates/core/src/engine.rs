//! Certified intersection test by adaptive simplex refinement.
//!
//! The search box is split into simplices, each cell gets certified bounds on
//! `min{ρ_A, ρ_B}`, and cells are refined until every one is either certified
//! above `α + τ` (an intersection witness), below `α − τ` (pruned), or smaller
//! than `ε` (unresolved). Categories with zero count in both outcomes are
//! handled by running the same search on every face of the simplex where a
//! subset of them is set to zero.
//!
//! Work proceeds in waves of [`WAVE_SIZE`] cells taken in priority order.
//! Decisions within a wave are made sequentially in that order and only the
//! bound computations for the children run in parallel, so the result does
//! not depend on the number of workers.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bounds_by_index, CacheStats, CellBounds, VertexProbCache};
use crate::domain::{build_domain, SearchDomain};
use crate::error::{MvcError, Result};
use crate::geometry::{bisect, from_logodds, kuhn_triangulation, SimplexCell, DEFAULT_SLACK};
use crate::multinomial::{default_outcome_budget, tail_mass, CountVector, OutcomeTable, SimplexPoint};

/// Number of cells popped from the queue per round.
pub const WAVE_SIZE: usize = 64;

pub const DEFAULT_MAX_CELLS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Intersect,
    Disjoint,
    Uncertain,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Intersect => "INTERSECT",
            Verdict::Disjoint => "DISJOINT",
            Verdict::Uncertain => "UNCERTAIN",
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Intersect => 0,
            Verdict::Disjoint => 1,
            Verdict::Uncertain => 2,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub alpha: f64,
    pub tau: f64,
    /// Cells with diameter at most `epsilon` are not split further.
    pub epsilon: f64,
    /// Maximum number of cells evaluated per face.
    pub max_cells: usize,
    pub slack: f64,
    /// Worker threads for bound evaluation; `0` uses the global rayon pool.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub record_trace: bool,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            tau: 1e-3,
            epsilon: 1e-3,
            max_cells: DEFAULT_MAX_CELLS,
            slack: DEFAULT_SLACK,
            workers: 0,
            record_trace: false,
        }
    }
}

impl DecisionConfig {
    pub fn new(alpha: f64, tau: f64, epsilon: f64) -> Self {
        Self {
            alpha,
            tau,
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MvcError::InvalidTolerance(format!("alpha = {} is outside (0, 1)", self.alpha)));
        }
        if !(self.tau > 0.0) || self.tau >= self.alpha.min(1.0 - self.alpha) {
            return Err(MvcError::InvalidTolerance(format!(
                "tau = {} must satisfy 0 < tau < min(alpha, 1 - alpha)",
                self.tau
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(MvcError::InvalidTolerance(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if self.max_cells < 2 {
            return Err(MvcError::InvalidTolerance("max_cells must be at least 2".into()));
        }
        if !(self.slack >= 0.0) || !self.slack.is_finite() {
            return Err(MvcError::InvalidTolerance(format!("slack = {} must be non-negative", self.slack)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellAction {
    Intersect,
    Prune,
    Unresolved,
    Split,
    /// Left in the queue when the cell budget ran out.
    Frontier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Collapsed categories of the face this cell belongs to.
    pub face: Vec<usize>,
    pub cell: u64,
    pub parent: Option<u64>,
    /// Vertices in the face's log-odds coordinates.
    pub vertices: Vec<Vec<f64>>,
    pub min_lower: f64,
    pub min_upper: f64,
    pub action: CellAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceSummary {
    /// Categories set to zero on this face.
    pub collapsed: Vec<usize>,
    pub verdict: Verdict,
    pub cells_processed: u64,
    pub pruned: u64,
    pub unresolved_count: u64,
    pub budget_exhausted: bool,
    /// `None` when the face was settled without a search box.
    pub domain: Option<SearchDomain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub witness: Option<SimplexPoint>,
    /// Exact p-values of both outcomes at the witness.
    pub witness_p_values: Option<[f64; 2]>,
    /// Collapsed categories of the face containing the witness.
    pub face: Option<Vec<usize>>,
    pub unresolved_count: u64,
    pub cells_processed: u64,
    pub pruned: u64,
    pub budget_exhausted: bool,
    pub cache: CacheStats,
    pub faces: Vec<FaceSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEvent>>,
}

/// A face of the simplex with its reduced outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    /// Categories set to zero (subset of the jointly-zero set).
    pub collapsed: Vec<usize>,
    /// Remaining categories, in increasing order.
    pub kept: Vec<usize>,
    /// Reduced outcomes; `None` when a single category remains.
    pub reduced: Option<(CountVector, CountVector)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacePlan {
    /// Categories observed in at least one outcome.
    pub support_union: Vec<usize>,
    /// Categories observed in neither outcome.
    pub jointly_zero: Vec<usize>,
    /// All `2^|Z|` faces, ordered by number of collapsed categories, then lexicographically.
    pub faces: Vec<Face>,
}

fn check_pair(r_a: &CountVector, r_b: &CountVector) -> Result<()> {
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
    Ok(())
}

/// Largest number of jointly-zero categories accepted by the face planner.
pub const MAX_JOINTLY_ZERO: usize = 20;

pub fn plan_faces(r_a: &CountVector, r_b: &CountVector) -> Result<FacePlan> {
    check_pair(r_a, r_b)?;
    let k = r_a.k();
    let (support_union, jointly_zero): (Vec<usize>, Vec<usize>) =
        (0..k).partition(|&i| r_a.counts()[i] > 0 || r_b.counts()[i] > 0);
    if jointly_zero.len() > MAX_JOINTLY_ZERO {
        return Err(MvcError::BudgetExceeded {
            what: "face decomposition",
            required: 1u128 << jointly_zero.len(),
            budget: 1u128 << MAX_JOINTLY_ZERO,
        });
    }
    let z = jointly_zero.len();
    let mut subsets: Vec<Vec<usize>> = (0u32..1 << z)
        .map(|mask| (0..z).filter(|&b| mask & (1 << b) != 0).map(|b| jointly_zero[b]).collect())
        .collect();
    subsets.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let faces = subsets
        .into_iter()
        .map(|collapsed| {
            let kept: Vec<usize> = (0..k).filter(|i| !collapsed.contains(i)).collect();
            let reduced = if kept.len() >= 2 {
                let pick = |r: &CountVector| {
                    CountVector::new(kept.iter().map(|&i| r.counts()[i]).collect()).expect("reduced outcome keeps n")
                };
                Some((pick(r_a), pick(r_b)))
            } else {
                None
            };
            Face {
                collapsed,
                kept,
                reduced,
            }
        })
        .collect();
    Ok(FacePlan {
        support_union,
        jointly_zero,
        faces,
    })
}

/// Category order used for the log-odds chart of a face: the last category
/// observed in either outcome is moved to the end to serve as reference.
pub fn reference_order(r_a: &CountVector, r_b: &CountVector) -> Vec<usize> {
    let k = r_a.k();
    let reference = (0..k)
        .rev()
        .find(|&i| r_a.counts()[i] + r_b.counts()[i] > 0)
        .expect("n > 0");
    (0..k).filter(|&i| i != reference).chain([reference]).collect()
}

struct QueueEntry {
    bounds: CellBounds,
    seq: u64,
    parent: Option<u64>,
    cell: SimplexCell,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // Max-heap: larger upper bound first, then earlier insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bounds
            .min_upper
            .total_cmp(&other.bounds.min_upper)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct FaceOutcome {
    summary: FaceSummary,
    witness: Option<(SimplexPoint, [f64; 2])>,
    trace: Vec<TraceEvent>,
    cache: CacheStats,
}

/// Runs the refinement on one face.
///
/// `r_a`, `r_b` are the reduced outcomes; categories zero in both are allowed
/// and are searched with open cells (see [`crate::bounds`]).
fn search_face(
    r_a: &CountVector,
    r_b: &CountVector,
    config: &DecisionConfig,
    collapsed: &[usize],
    pool: Option<&rayon::ThreadPool>,
) -> Result<FaceOutcome> {
    let k = r_a.k();
    let order = reference_order(r_a, r_b);
    let permute = |r: &CountVector| CountVector::new(order.iter().map(|&i| r.counts()[i]).collect()).expect("same n");
    let (pa, pb) = (permute(r_a), permute(r_b));

    let table = OutcomeTable::with_budget(r_a.n(), k, default_outcome_budget())?;
    let ia = table.locate(&pa)?;
    let ib = table.locate(&pb)?;

    let mut summary = FaceSummary {
        collapsed: collapsed.to_vec(),
        verdict: Verdict::Disjoint,
        cells_processed: 0,
        pruned: 0,
        unresolved_count: 0,
        budget_exhausted: false,
        domain: None,
    };
    let domain = match build_domain(&pa, &pb, config.alpha, config.tau, &table) {
        Ok(d) => d,
        Err(MvcError::EmptyDomain) => {
            return Ok(FaceOutcome {
                summary,
                witness: None,
                trace: Vec::new(),
                cache: CacheStats::default(),
            })
        }
        Err(e) => return Err(e),
    };
    summary.domain = Some(domain.clone());

    let cache = VertexProbCache::new(&table);
    let hi_target = config.alpha + config.tau;
    let lo_target = config.alpha - config.tau;
    let open_of = |cell: &SimplexCell| -> Vec<usize> {
        domain
            .open_axes
            .iter()
            .copied()
            .filter(|&i| cell.vertices().iter().any(|v| v.coords()[i] == domain.lower[i]))
            .collect()
    };
    let evaluate = |cells: Vec<(SimplexCell, Option<u64>)>, first_seq: u64| -> Vec<QueueEntry> {
        let work = |(j, (cell, parent)): (usize, (SimplexCell, Option<u64>))| {
            let open = open_of(&cell);
            let bounds = bounds_by_index(&cell, &open, ia, ib, &table, &cache, config.slack);
            QueueEntry {
                bounds,
                seq: first_seq + j as u64,
                parent,
                cell,
            }
        };
        match pool {
            Some(pool) if cells.len() > 1 => {
                pool.install(|| cells.into_par_iter().enumerate().map(work).collect())
            }
            None if cells.len() > 1 && config.workers != 1 => cells.into_par_iter().enumerate().map(work).collect(),
            _ => cells.into_iter().enumerate().map(work).collect(),
        }
    };

    let initial = kuhn_triangulation(&domain.lower, &domain.upper)?;
    let mut next_seq = initial.len() as u64;
    let mut heap: BinaryHeap<QueueEntry> = evaluate(initial.into_iter().map(|c| (c, None)).collect(), 0)
        .into_iter()
        .collect();
    let mut evaluated = next_seq;
    let mut trace = Vec::new();
    let mut record = |entry: &QueueEntry, action: CellAction| {
        if config.record_trace {
            trace.push(TraceEvent {
                face: collapsed.to_vec(),
                cell: entry.seq,
                parent: entry.parent,
                vertices: entry.cell.vertices().iter().map(|v| v.coords().to_vec()).collect(),
                min_lower: entry.bounds.min_lower,
                min_upper: entry.bounds.min_upper,
                action,
            });
        }
    };

    let mut witness = None;
    let mut frontier = None;
    'waves: while !heap.is_empty() {
        let mut children = Vec::new();
        for _ in 0..WAVE_SIZE {
            let Some(entry) = heap.pop() else { break };
            summary.cells_processed += 1;
            let b = &entry.bounds;
            if b.min_lower >= hi_target {
                record(&entry, CellAction::Intersect);
                let reduced = from_logodds(&entry.cell.centroid());
                let mut probs = vec![0.0; k];
                for (slot, &cat) in order.iter().enumerate() {
                    probs[cat] = reduced.probs()[slot];
                }
                let ln_p: Vec<f64> = reduced.probs().iter().map(|p| p.ln()).collect();
                let mut lp = Vec::with_capacity(table.len());
                table.log_probs_into(&ln_p, &mut lp);
                let values = [tail_mass(&lp, lp[ia]), tail_mass(&lp, lp[ib])];
                witness = Some((SimplexPoint::from_raw(probs), values));
                summary.verdict = Verdict::Intersect;
                break 'waves;
            }
            if b.min_upper < lo_target {
                summary.pruned += 1;
                record(&entry, CellAction::Prune);
                continue;
            }
            if entry.cell.diameter() <= config.epsilon {
                summary.unresolved_count += 1;
                record(&entry, CellAction::Unresolved);
                continue;
            }
            if evaluated + children.len() as u64 + 2 > config.max_cells as u64 {
                summary.budget_exhausted = true;
                frontier = Some(entry);
                break;
            }
            record(&entry, CellAction::Split);
            let (c1, c2) = bisect(&entry.cell)?;
            children.push((c1, Some(entry.seq)));
            children.push((c2, Some(entry.seq)));
        }
        let count = children.len() as u64;
        if count > 0 {
            heap.extend(evaluate(children, next_seq));
            next_seq += count;
            evaluated += count;
        }
        if summary.budget_exhausted {
            break;
        }
    }

    if summary.budget_exhausted {
        // Everything still open counts as unresolved; in the trace in priority order.
        let rest = heap.into_sorted_vec();
        for entry in frontier.iter().chain(rest.iter().rev()) {
            summary.unresolved_count += 1;
            record(entry, CellAction::Frontier);
        }
    }
    if summary.verdict != Verdict::Intersect && summary.unresolved_count > 0 {
        summary.verdict = Verdict::Uncertain;
    }
    Ok(FaceOutcome {
        summary,
        witness,
        trace,
        cache: cache.stats(),
    })
}

fn build_pool(config: &DecisionConfig) -> Result<Option<rayon::ThreadPool>> {
    if config.workers <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map(Some)
        .map_err(|e| MvcError::InvalidDimension(format!("cannot start worker pool: {e}")))
}

fn lift(point: &SimplexPoint, kept: &[usize], k: usize) -> SimplexPoint {
    let mut probs = vec![0.0; k];
    for (&cat, &p) in kept.iter().zip(point.probs()) {
        probs[cat] = p;
    }
    SimplexPoint::from_raw(probs)
}

/// Refinement on the open simplex only (no face decomposition).
///
/// Outcomes may contain categories that are zero in both; the search then
/// covers the interior of the simplex including its limit towards those
/// faces, but never points on them.
pub fn decide_interior(r_a: &CountVector, r_b: &CountVector, config: &DecisionConfig) -> Result<Decision> {
    config.validate()?;
    check_pair(r_a, r_b)?;
    let pool = build_pool(config)?;
    let outcome = search_face(r_a, r_b, config, &[], pool.as_ref())?;
    Ok(assemble(vec![outcome], None, config))
}

/// Full decision with face decomposition over jointly-zero categories.
pub fn decide_with_faces(r_a: &CountVector, r_b: &CountVector, config: &DecisionConfig) -> Result<Decision> {
    config.validate()?;
    let plan = plan_faces(r_a, r_b)?;
    let pool = build_pool(config)?;
    let k = r_a.k();
    let mut outcomes = Vec::new();
    let mut witness = None;
    for face in &plan.faces {
        match &face.reduced {
            None => {
                // One category left: both outcomes put all mass there and ρ ≡ 1.
                let mut probs = vec![0.0; k];
                probs[face.kept[0]] = 1.0;
                outcomes.push(FaceOutcome {
                    summary: FaceSummary {
                        collapsed: face.collapsed.clone(),
                        verdict: Verdict::Intersect,
                        cells_processed: 0,
                        pruned: 0,
                        unresolved_count: 0,
                        budget_exhausted: false,
                        domain: None,
                    },
                    witness: None,
                    trace: Vec::new(),
                    cache: CacheStats::default(),
                });
                witness = Some((SimplexPoint::from_raw(probs), [1.0, 1.0], face.collapsed.clone()));
            }
            Some((ra, rb)) => {
                let mut out = search_face(ra, rb, config, &face.collapsed, pool.as_ref())?;
                if let Some((p, values)) = out.witness.take() {
                    witness = Some((lift(&p, &face.kept, k), values, face.collapsed.clone()));
                }
                outcomes.push(out);
            }
        }
        if witness.is_some() {
            break;
        }
    }
    Ok(assemble(outcomes, witness, config))
}

fn assemble(
    outcomes: Vec<FaceOutcome>,
    lifted: Option<(SimplexPoint, [f64; 2], Vec<usize>)>,
    config: &DecisionConfig,
) -> Decision {
    let mut decision = Decision {
        verdict: Verdict::Disjoint,
        witness: None,
        witness_p_values: None,
        face: None,
        unresolved_count: 0,
        cells_processed: 0,
        pruned: 0,
        budget_exhausted: false,
        cache: CacheStats::default(),
        faces: Vec::with_capacity(outcomes.len()),
        trace: config.record_trace.then(Vec::new),
    };
    let mut interior_witness = None;
    for out in outcomes {
        decision.unresolved_count += out.summary.unresolved_count;
        decision.cells_processed += out.summary.cells_processed;
        decision.pruned += out.summary.pruned;
        decision.budget_exhausted |= out.summary.budget_exhausted;
        decision.cache.hits += out.cache.hits;
        decision.cache.misses += out.cache.misses;
        if let Some(t) = decision.trace.as_mut() {
            t.extend(out.trace);
        }
        if let Some((p, v)) = out.witness {
            interior_witness = Some((p, v, out.summary.collapsed.clone()));
        }
        decision.faces.push(out.summary);
    }
    let found = lifted.or(interior_witness);
    if let Some((p, values, face)) = found {
        decision.verdict = Verdict::Intersect;
        decision.witness = Some(p);
        decision.witness_p_values = Some(values);
        decision.face = Some(face);
    } else if decision.faces.iter().any(|f| f.verdict != Verdict::Disjoint) {
        decision.verdict = Verdict::Uncertain;
    }
    decision
}
