#ifndef CHAOSCERT_H
#define CHAOSCERT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum ChcStatus {
  CHC_STATUS_OK = 0,
  CHC_STATUS_NULL_POINTER = 1,
  CHC_STATUS_INVALID_INPUT = 2,
  CHC_STATUS_DIMENSION_MISMATCH = 3,
  CHC_STATUS_NOT_POSITIVE_SEMIDEFINITE = 4,
  CHC_STATUS_JSON = 5,
  CHC_STATUS_INTERNAL = 6,
} ChcStatus;

// An expansion `F = Σ_r I_r(f_r)` with values in `ℝ^Hdim`.
typedef struct ChcExpansion ChcExpansion;

// A square matrix acting on `ℝ^dim`.
typedef struct ChcOperator ChcOperator;

// A certificate evaluated over an `(N, m)` grid.
typedef struct ChcReport ChcReport;

// The minimizing grid row of a certificate.
typedef struct ChcBound {
  double bound;
  double r1;
  double r2;
  double r3;
  double r4;
  double r5;
  double r6;
  size_t n;
  size_t m;
} ChcBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or NULL. The pointer stays
// valid until the next call into the library on the same thread.
const char *chc_last_error(void);

// Library version as a static NUL-terminated string.
const char *chc_version(void);

// Parses expansion JSON (or a bare kernel file). With `strict` nonzero,
// asymmetric coefficient lists are rejected instead of symmetrized.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum ChcStatus chc_expansion_from_json(const char *json, int32_t strict, struct ChcExpansion **out);

// # Safety
// `f` must be NULL or a handle from this library not yet freed.
void chc_expansion_free(struct ChcExpansion *f);

// Writes `dim ℋ`, the output dimension and the largest order.
//
// # Safety
// All pointers must be valid.
enum ChcStatus chc_expansion_dims(const struct ChcExpansion *f,
                                  size_t *hdim,
                                  size_t *big_hdim,
                                  size_t *max_order);

// Exact covariance `E[F ⊗ F]` as a new operator.
//
// # Safety
// `f` must be a valid handle and `out` a valid pointer.
enum ChcStatus chc_expansion_covariance(const struct ChcExpansion *f, struct ChcOperator **out);

// Builds a `dim × dim` operator from row-major entries.
//
// # Safety
// `data` must point to `dim * dim` doubles and `out` must be valid.
enum ChcStatus chc_operator_from_row_major(size_t dim,
                                           const double *data,
                                           struct ChcOperator **out);

// # Safety
// `t` must be NULL or a handle from this library not yet freed.
void chc_operator_free(struct ChcOperator *t);

// Dimension of the operator, or 0 for NULL.
//
// # Safety
// `t` must be NULL or a valid handle.
size_t chc_operator_dim(const struct ChcOperator *t);

// Copies the entries in row-major order into `buf`, which holds `len` doubles.
//
// # Safety
// `t` must be valid and `buf` must point to `len` writable doubles.
enum ChcStatus chc_operator_to_row_major(const struct ChcOperator *t, double *buf, size_t len);

// Schatten `p`-norm; pass `INFINITY` for the operator norm.
//
// # Safety
// `t` and `out` must be valid.
enum ChcStatus chc_operator_schatten_norm(const struct ChcOperator *t, double p, double *out);

// `(1/2)‖T1 − T2‖_{S₁}` for two covariance operators. `degenerate` is set to
// 1 when neither operator is strictly positive definite, else 0.
//
// # Safety
// All pointers must be valid; `degenerate` may be NULL.
enum ChcStatus chc_gaussian_pair_bound(const struct ChcOperator *t1,
                                       const struct ChcOperator *t2,
                                       double *value,
                                       int32_t *degenerate);

// Evaluates the certificate of `F` against `N(0, T)` on the grid
// `n_grid × m_grid`. The target is split across orders the same way as the
// command line tool does.
//
// # Safety
// Handles must be valid, grids must point to the stated number of entries
// and `out` must be valid.
enum ChcStatus chc_certify(const struct ChcExpansion *f,
                           const struct ChcOperator *target,
                           const size_t *n_grid,
                           size_t n_len,
                           const size_t *m_grid,
                           size_t m_len,
                           struct ChcReport **out);

// # Safety
// `r` must be NULL or a handle from this library not yet freed.
void chc_report_free(struct ChcReport *r);

// Copies the minimizing row of the report.
//
// # Safety
// `r` and `out` must be valid.
enum ChcStatus chc_report_bound(const struct ChcReport *r, struct ChcBound *out);

// The full report, grid table and diagnostics included, as JSON. Release
// the string with [`chc_string_free`].
//
// # Safety
// `r` and `out` must be valid.
enum ChcStatus chc_report_to_json(const struct ChcReport *r, char **out);

// # Safety
// `s` must be NULL or a string returned by this library not yet freed.
void chc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHAOSCERT_H */
