#ifndef MVC_H
#define MVC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MvcStatus {
  MVC_STATUS_OK = 0,
  MVC_STATUS_NULL_POINTER = 1,
  MVC_STATUS_INVALID_ARGUMENT = 2,
  MVC_STATUS_DIMENSION_MISMATCH = 3,
  MVC_STATUS_BUDGET_EXCEEDED = 4,
  MVC_STATUS_INVALID_TOLERANCE = 5,
  MVC_STATUS_INTERNAL = 6,
  MVC_STATUS_PANIC = 7,
} MvcStatus;

typedef enum MvcVerdict {
  MVC_VERDICT_INTERSECT = 0,
  MVC_VERDICT_DISJOINT = 1,
  MVC_VERDICT_UNCERTAIN = 2,
} MvcVerdict;

/**
 * Result of [`mvc_decide`].
 */
typedef struct MvcDecision MvcDecision;

/**
 * Outcome table for fixed `n` and `k`, reusable across p-value queries.
 */
typedef struct MvcTable MvcTable;

/**
 * Decision parameters. `workers = 0` uses the global thread pool.
 */
typedef struct MvcConfig {
  double alpha;
  double tau;
  double epsilon;
  uint64_t max_cells;
  double slack;
  uint32_t workers;
} MvcConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *mvc_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *mvc_version(void);

struct MvcConfig mvc_config_default(void);

/**
 * Builds the outcome table for `n` trials over `k` categories.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum MvcStatus mvc_table_new(uint32_t n, size_t k, struct MvcTable **out);

/**
 * Number of outcomes in the table, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle from [`mvc_table_new`].
 */
size_t mvc_table_len(const struct MvcTable *table);

/**
 * Exact p-value of `counts` under `probs`, both of length `k`.
 *
 * # Safety
 * `table` must be a live handle; `counts` and `probs` must hold `k`
 * elements; `out` must be writable.
 */
enum MvcStatus mvc_table_p_value(const struct MvcTable *table,
                                 const uint32_t *counts,
                                 const double *probs,
                                 size_t k,
                                 double *out);

/**
 * # Safety
 * `table` must be null or a handle from [`mvc_table_new`] not yet freed.
 */
void mvc_table_free(struct MvcTable *table);

/**
 * One-shot exact p-value; builds a temporary table.
 *
 * # Safety
 * `counts` and `probs` must hold `k` elements; `out` must be writable.
 */
enum MvcStatus mvc_exact_p_value(const uint32_t *counts,
                                 const double *probs,
                                 size_t k,
                                 double *out);

/**
 * Chi-square quantile for `df >= 1` and `0 < prob < 1`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MvcStatus mvc_chisq_quantile(uint32_t df, double prob, double *out);

/**
 * Decides whether the confidence sets of outcomes `a` and `b` (both of
 * length `k`) intersect. `config` may be null for defaults.
 *
 * # Safety
 * `a` and `b` must hold `k` elements; `config` must be null or valid;
 * `out` must be writable.
 */
enum MvcStatus mvc_decide(const uint32_t *a,
                          const uint32_t *b,
                          size_t k,
                          const struct MvcConfig *config,
                          struct MvcDecision **out);

/**
 * Verdict of a decision; a null handle reads as `UNCERTAIN`.
 *
 * # Safety
 * `d` must be null or a live handle from [`mvc_decide`].
 */
enum MvcVerdict mvc_decision_verdict(const struct MvcDecision *d);

/**
 * Copies up to `len` witness coordinates into `buf` and returns the witness
 * length, or 0 when there is no witness.
 *
 * # Safety
 * `d` must be null or live; `buf` must be null or hold `len` elements.
 */
size_t mvc_decision_witness(const struct MvcDecision *d, double *buf, size_t len);

/**
 * # Safety
 * `d` must be null or a live handle.
 */
uint64_t mvc_decision_cells_processed(const struct MvcDecision *d);

/**
 * # Safety
 * `d` must be null or a live handle.
 */
uint64_t mvc_decision_unresolved_count(const struct MvcDecision *d);

/**
 * Full run report as JSON. Free the result with [`mvc_string_free`];
 * returns null for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
char *mvc_decision_to_json(const struct MvcDecision *d);

/**
 * # Safety
 * `d` must be null or a handle from [`mvc_decide`] not yet freed.
 */
void mvc_decision_free(struct MvcDecision *d);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void mvc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVC_H */
