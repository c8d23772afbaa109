#ifndef RANKSTAB_H
#define RANKSTAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RsStatus {
  RS_STATUS_OK = 0,
  RS_STATUS_NULL_POINTER = 1,
  RS_STATUS_INVALID_UTF8 = 2,
  RS_STATUS_PARSE = 3,
  RS_STATUS_VALIDATION = 4,
  RS_STATUS_CONTRACT = 5,
  RS_STATUS_IO = 6,
  RS_STATUS_RUNTIME = 7,
  RS_STATUS_PANIC = 8,
} RsStatus;

/**
 * An interaction log.
 */
typedef struct RsDataset RsDataset;

/**
 * A dependency DAG together with its cascading scores.
 */
typedef struct RsIdag RsIdag;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *rs_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *rs_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void rs_string_free(char *s);

/**
 * Loads a delimited `user,item,timestamp` log (first three columns).
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum RsStatus rs_dataset_load(const char *path,
                              bool has_header,
                              bool tab_separated,
                              struct RsDataset **out);

/**
 * Generates a synthetic log.
 *
 * # Safety
 * `out` must be writable.
 */
enum RsStatus rs_dataset_synth(size_t n_users,
                               size_t n_items,
                               size_t events_per_user,
                               double concentration,
                               uint64_t seed,
                               struct RsDataset **out);

/**
 * Number of interactions; 0 for null.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t rs_dataset_len(const struct RsDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t rs_dataset_n_users(const struct RsDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live handle.
 */
size_t rs_dataset_n_items(const struct RsDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle from this library, freed once.
 */
void rs_dataset_free(struct RsDataset *ds);

/**
 * Builds the dependency DAG of `ds` and its cascading scores.
 * `max_seq_len` of 0 means no per-user window.
 *
 * # Safety
 * `ds` must be a live handle and `out` writable.
 */
enum RsStatus rs_idag_build(const struct RsDataset *ds, size_t max_seq_len, struct RsIdag **out);

/**
 * # Safety
 * `g` must be null or a live handle.
 */
size_t rs_idag_node_count(const struct RsIdag *g);

/**
 * # Safety
 * `g` must be null or a live handle.
 */
size_t rs_idag_edge_count(const struct RsIdag *g);

/**
 * Number of nodes with no incoming edge.
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t rs_idag_zero_in_degree(const struct RsIdag *g);

/**
 * Writes the `k` highest-scoring zero in-degree interactions as sequence
 * indices into `seq_out` and their scores into `score_out` (may be null).
 * Fails when `k` exceeds the zero in-degree count.
 *
 * # Safety
 * `g` must be a live handle; `seq_out` (and `score_out` if non-null) must
 * hold `k` elements.
 */
enum RsStatus rs_idag_top_targets(const struct RsIdag *g,
                                  size_t k,
                                  uint64_t *seq_out,
                                  uint64_t *score_out);

/**
 * # Safety
 * `g` must be null or a handle from this library, freed once.
 */
void rs_idag_free(struct RsIdag *g);

/**
 * Truncated RBO (or its normalized form) of two rankings of length `len`
 * over `universe` items.
 *
 * # Safety
 * `a` and `b` must hold `len` elements; `out` must be writable.
 */
enum RsStatus rs_rbo(const uint32_t *a,
                     const uint32_t *b,
                     size_t len,
                     size_t universe,
                     double p,
                     bool normalized,
                     double *out);

/**
 * # Safety
 * `a` and `b` must hold `len` elements; `out` must be writable.
 */
enum RsStatus rs_jaccard_top_k(const uint32_t *a,
                               const uint32_t *b,
                               size_t len,
                               size_t universe,
                               size_t k,
                               double *out);

/**
 * Two-sided Wilcoxon signed-rank test on `n` pairs.
 *
 * # Safety
 * `x` and `y` must hold `n` elements; `statistic` and `p_value` writable.
 */
enum RsStatus rs_wilcoxon(const double *x,
                          const double *y,
                          size_t n,
                          double *statistic,
                          double *p_value);

/**
 * Runs a stability experiment from a JSON config and returns the report as
 * JSON. Output files are not written.
 *
 * # Safety
 * `config` must be nul-terminated; `out` writable.
 */
enum RsStatus rs_run_stability_json(const char *config, char **out);

/**
 * Like [`rs_run_stability_json`] with the edit disabled; fails with
 * `Runtime` if the two trainings disagree.
 *
 * # Safety
 * `config` must be nul-terminated; `out` writable.
 */
enum RsStatus rs_run_control_json(const char *config, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANKSTAB_H */
