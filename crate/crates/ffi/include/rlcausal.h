#ifndef RLCAUSAL_H
#define RLCAUSAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Regression family for BIC scoring.
typedef enum RlcRegression {
  RLC_REGRESSION_LINEAR = 0,
  RLC_REGRESSION_QUADRATIC = 1,
} RlcRegression;

// Result code of every fallible call.
typedef enum RlcStatus {
  RLC_STATUS_OK = 0,
  RLC_STATUS_NULL_POINTER = 1,
  RLC_STATUS_INVALID_ARGUMENT = 2,
  RLC_STATUS_VALIDATION = 3,
  RLC_STATUS_DOMAIN = 4,
  RLC_STATUS_IO = 5,
  RLC_STATUS_DIVERGED = 6,
  RLC_STATUS_INTERNAL = 7,
} RlcStatus;

// Opaque dataset handle.
typedef struct RlcDataset RlcDataset;

// Opaque graph handle.
typedef struct RlcGraph RlcGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *rlc_last_error_message(void);

// Library version as a static nul-terminated string.
const char *rlc_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void rlc_string_free(char *s);

// Loads a CSV file with a header row; column kinds are inferred.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum RlcStatus rlc_dataset_load_csv(const char *path, struct RlcDataset **out);

// Wraps a row-major `rows×cols` array of samples; columns are named `x0..`.
//
// # Safety
// `data` must point to `rows * cols` readable doubles; `out` must be writable.
enum RlcStatus rlc_dataset_from_rows(const double *data,
                                     uintptr_t rows,
                                     uintptr_t cols,
                                     struct RlcDataset **out);

// Integer-encodes categorical columns and z-scores every column into a new
// dataset.
//
// # Safety
// `ds` must be a live dataset handle; `out` must be writable.
enum RlcStatus rlc_dataset_standardize(const struct RlcDataset *ds, struct RlcDataset **out);

// Sample count, or 0 for null.
//
// # Safety
// `ds` must be null or a live dataset handle.
uintptr_t rlc_dataset_rows(const struct RlcDataset *ds);

// Variable count, or 0 for null.
//
// # Safety
// `ds` must be null or a live dataset handle.
uintptr_t rlc_dataset_cols(const struct RlcDataset *ds);

// # Safety
// `ds` must be null or a handle not yet freed.
void rlc_dataset_free(struct RlcDataset *ds);

// Graph on `d` nodes (named `x0..`) with edges `from[k] → to[k]`.
//
// # Safety
// `from` and `to` must each hold `n_edges` readable values (may be null when
// `n_edges` is 0); `out` must be writable.
enum RlcStatus rlc_graph_from_edges(uintptr_t d,
                                    const uintptr_t *from,
                                    const uintptr_t *to,
                                    uintptr_t n_edges,
                                    struct RlcGraph **out);

// # Safety
// `g` must be null or a live graph handle.
uintptr_t rlc_graph_node_count(const struct RlcGraph *g);

// # Safety
// `g` must be null or a live graph handle.
uintptr_t rlc_graph_edge_count(const struct RlcGraph *g);

// Writes whether the edge `from → to` exists.
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum RlcStatus rlc_graph_has_edge(const struct RlcGraph *g,
                                  uintptr_t from,
                                  uintptr_t to,
                                  bool *out);

// Exact cycle test.
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum RlcStatus rlc_graph_is_dag(const struct RlcGraph *g, bool *out);

// `trace(e^A) − d` of the graph's adjacency.
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum RlcStatus rlc_graph_acyclicity_penalty(const struct RlcGraph *g, double *out);

// Graph as a versioned JSON document; free the result with
// [`rlc_string_free`].
//
// # Safety
// `g` must be a live graph handle; `out` must be writable.
enum RlcStatus rlc_graph_to_json(const struct RlcGraph *g, char **out);

// # Safety
// `g` must be null or a handle not yet freed.
void rlc_graph_free(struct RlcGraph *g);

// BIC of `g` on the numeric dataset `ds`.
//
// # Safety
// `ds` and `g` must be live handles; `out` must be writable.
enum RlcStatus rlc_bic(const struct RlcDataset *ds,
                       const struct RlcGraph *g,
                       enum RlcRegression kind,
                       double *out);

// `ψ(x)` for `x > 0`.
//
// # Safety
// `out` must be writable.
enum RlcStatus rlc_digamma(double x, double *out);

// Spacing estimate of differential entropy in nats.
//
// # Safety
// `xs` must hold `n` readable doubles; `out` must be writable.
enum RlcStatus rlc_spacing_entropy(const double *xs, uintptr_t n, double *out);

// Runs the search on a numeric dataset and returns the best DAG.
// `config_json` is a trainer configuration object (null for defaults);
// missing fields take their defaults.
//
// # Safety
// `ds` must be a live handle; `config_json` must be null or nul-terminated;
// `out` must be writable.
enum RlcStatus rlc_discover(const struct RlcDataset *ds,
                            const char *config_json,
                            enum RlcRegression kind,
                            struct RlcGraph **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RLCAUSAL_H */
