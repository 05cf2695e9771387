//! C ABI over `mvc-core`.
//!
//! Every function returns an [`MvcStatus`] (or a plain value for infallible
//! getters) and never unwinds across the boundary. Handles are opaque and
//! must be released with the matching `*_free` function. After a failure,
//! [`mvc_last_error_message`] describes it on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Instant;

use mvc_core::baseline::chisq_quantile;
use mvc_core::engine::{decide_with_faces, Decision, DecisionConfig, Verdict, DEFAULT_MAX_CELLS};
use mvc_core::geometry::DEFAULT_SLACK;
use mvc_core::multinomial::{exact_p_value, CountVector, OutcomeTable, SimplexPoint};
use mvc_core::report::RunReport;
use mvc_core::MvcError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    BudgetExceeded = 4,
    InvalidTolerance = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvcVerdict {
    Intersect = 0,
    Disjoint = 1,
    Uncertain = 2,
}

impl From<Verdict> for MvcVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Intersect => Self::Intersect,
            Verdict::Disjoint => Self::Disjoint,
            Verdict::Uncertain => Self::Uncertain,
        }
    }
}

/// Decision parameters. `workers = 0` uses the global thread pool.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MvcConfig {
    pub alpha: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub max_cells: u64,
    pub slack: f64,
    pub workers: u32,
}

impl From<&MvcConfig> for DecisionConfig {
    fn from(c: &MvcConfig) -> Self {
        DecisionConfig {
            alpha: c.alpha,
            tau: c.tau,
            epsilon: c.epsilon,
            max_cells: usize::try_from(c.max_cells).unwrap_or(usize::MAX),
            slack: c.slack,
            workers: c.workers as usize,
            record_trace: false,
        }
    }
}

/// Outcome table for fixed `n` and `k`, reusable across p-value queries.
pub struct MvcTable {
    table: OutcomeTable,
}

/// Result of [`mvc_decide`].
pub struct MvcDecision {
    report: RunReport,
    decision: Decision,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &MvcError) -> MvcStatus {
    match err {
        MvcError::DimensionMismatch { .. } => MvcStatus::DimensionMismatch,
        MvcError::BudgetExceeded { .. } => MvcStatus::BudgetExceeded,
        MvcError::InvalidTolerance(_) => MvcStatus::InvalidTolerance,
        MvcError::EmptyDomain | MvcError::DegenerateCell(_) | MvcError::DegenerateSlice { .. } => MvcStatus::Internal,
        _ => MvcStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and turning panics into [`MvcStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), (MvcStatus, String)>) -> MvcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MvcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            MvcStatus::Panic
        }
    }
}

fn core_err(e: MvcError) -> (MvcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MvcStatus, String) {
    (MvcStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or point to `len` readable elements.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], (MvcStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn parse_counts(ptr: *const u32, k: usize, what: &str) -> Result<CountVector, (MvcStatus, String)> {
    CountVector::new(slice(ptr, k, what)?.to_vec()).map_err(core_err)
}

unsafe fn point(ptr: *const f64, k: usize) -> Result<SimplexPoint, (MvcStatus, String)> {
    SimplexPoint::new(slice(ptr, k, "probs")?.to_vec()).map_err(core_err)
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn mvc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn mvc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn mvc_config_default() -> MvcConfig {
    MvcConfig {
        alpha: 0.05,
        tau: 1e-3,
        epsilon: 1e-3,
        max_cells: DEFAULT_MAX_CELLS as u64,
        slack: DEFAULT_SLACK,
        workers: 0,
    }
}

/// Builds the outcome table for `n` trials over `k` categories.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn mvc_table_new(n: u32, k: usize, out: *mut *mut MvcTable) -> MvcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let table = OutcomeTable::new(n, k).map_err(core_err)?;
        *out = Box::into_raw(Box::new(MvcTable { table }));
        Ok(())
    })
}

/// Number of outcomes in the table, or 0 for a null handle.
///
/// # Safety
/// `table` must be null or a live handle from [`mvc_table_new`].
#[no_mangle]
pub unsafe extern "C" fn mvc_table_len(table: *const MvcTable) -> usize {
    table.as_ref().map_or(0, |t| t.table.len())
}

/// Exact p-value of `counts` under `probs`, both of length `k`.
///
/// # Safety
/// `table` must be a live handle; `counts` and `probs` must hold `k`
/// elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvc_table_p_value(
    table: *const MvcTable,
    counts: *const u32,
    probs: *const f64,
    k: usize,
    out: *mut f64,
) -> MvcStatus {
    guard(|| {
        let table = table.as_ref().ok_or_else(|| null("table"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = parse_counts(counts, k, "counts")?;
        let p = point(probs, k)?;
        *out = exact_p_value(&r, &p, &table.table).map_err(core_err)?;
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a handle from [`mvc_table_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvc_table_free(table: *mut MvcTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// One-shot exact p-value; builds a temporary table.
///
/// # Safety
/// `counts` and `probs` must hold `k` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvc_exact_p_value(
    counts: *const u32,
    probs: *const f64,
    k: usize,
    out: *mut f64,
) -> MvcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let r = parse_counts(counts, k, "counts")?;
        let p = point(probs, k)?;
        let table = OutcomeTable::new(r.n(), r.k()).map_err(core_err)?;
        *out = exact_p_value(&r, &p, &table).map_err(core_err)?;
        Ok(())
    })
}

/// Chi-square quantile for `df >= 1` and `0 < prob < 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvc_chisq_quantile(df: u32, prob: f64, out: *mut f64) -> MvcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if df == 0 || !(prob > 0.0 && prob < 1.0) {
            return Err((MvcStatus::InvalidArgument, format!("need df >= 1 and 0 < prob < 1, got {df}, {prob}")));
        }
        *out = chisq_quantile(df, prob);
        Ok(())
    })
}

/// Decides whether the confidence sets of outcomes `a` and `b` (both of
/// length `k`) intersect. `config` may be null for defaults.
///
/// # Safety
/// `a` and `b` must hold `k` elements; `config` must be null or valid;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvc_decide(
    a: *const u32,
    b: *const u32,
    k: usize,
    config: *const MvcConfig,
    out: *mut *mut MvcDecision,
) -> MvcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ra = parse_counts(a, k, "a")?;
        let rb = parse_counts(b, k, "b")?;
        let cfg = config.as_ref().copied().unwrap_or_else(|| mvc_config_default());
        let cfg = DecisionConfig::from(&cfg);
        let start = Instant::now();
        let decision = decide_with_faces(&ra, &rb, &cfg).map_err(core_err)?;
        let wall = start.elapsed().as_secs_f64() * 1e3;
        let report = RunReport::new(&ra, &rb, &cfg, &decision, wall);
        *out = Box::into_raw(Box::new(MvcDecision { report, decision }));
        Ok(())
    })
}

/// Verdict of a decision; a null handle reads as `UNCERTAIN`.
///
/// # Safety
/// `d` must be null or a live handle from [`mvc_decide`].
#[no_mangle]
pub unsafe extern "C" fn mvc_decision_verdict(d: *const MvcDecision) -> MvcVerdict {
    d.as_ref().map_or(MvcVerdict::Uncertain, |d| d.decision.verdict.into())
}

/// Copies up to `len` witness coordinates into `buf` and returns the witness
/// length, or 0 when there is no witness.
///
/// # Safety
/// `d` must be null or live; `buf` must be null or hold `len` elements.
#[no_mangle]
pub unsafe extern "C" fn mvc_decision_witness(d: *const MvcDecision, buf: *mut f64, len: usize) -> usize {
    let Some(w) = d.as_ref().and_then(|d| d.decision.witness.as_ref()) else {
        return 0;
    };
    let probs = w.probs();
    if !buf.is_null() {
        let n = probs.len().min(len);
        ptr::copy_nonoverlapping(probs.as_ptr(), buf, n);
    }
    probs.len()
}

/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvc_decision_cells_processed(d: *const MvcDecision) -> u64 {
    d.as_ref().map_or(0, |d| d.decision.cells_processed)
}

/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvc_decision_unresolved_count(d: *const MvcDecision) -> u64 {
    d.as_ref().map_or(0, |d| d.decision.unresolved_count)
}

/// Full run report as JSON. Free the result with [`mvc_string_free`];
/// returns null for a null handle.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvc_decision_to_json(d: *const MvcDecision) -> *mut c_char {
    let Some(d) = d.as_ref() else {
        return ptr::null_mut();
    };
    CString::new(d.report.to_json()).map_or(ptr::null_mut(), CString::into_raw)
}

/// # Safety
/// `d` must be null or a handle from [`mvc_decide`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvc_decision_free(d: *mut MvcDecision) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
