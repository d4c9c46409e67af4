#ifndef DELTACONV_H
#define DELTACONV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum {
  DC_STATUS_OK = 0,
  DC_STATUS_INVALID_ARGUMENT = 1,
  DC_STATUS_INVALID_INPUT = 2,
  DC_STATUS_SHAPE_MISMATCH = 3,
  // Degenerate neighborhood, ill-conditioned fit or degenerate patch.
  DC_STATUS_NUMERICAL = 4,
  DC_STATUS_NULL_POINTER = 5,
  DC_STATUS_BUFFER_TOO_SMALL = 6,
  DC_STATUS_PANIC = 7,
} DcStatus;

// Operators of a built set.
typedef enum {
  // Raw gradient, `2N × N`.
  DC_OPERATOR_G = 0,
  // ℓ∞-normalized gradient.
  DC_OPERATOR_G_HAT = 1,
  // Per-point 90° rotation, `2N × 2N`.
  DC_OPERATOR_J = 2,
  // Raw divergence, `N × 2N`.
  DC_OPERATOR_D = 3,
  DC_OPERATOR_D_HAT = 4,
  DC_OPERATOR_CURL = 5,
  // Hodge Laplacian on vectors, `2N × 2N`.
  DC_OPERATOR_L = 6,
  // Laplace–Beltrami on scalars, `N × N`.
  DC_OPERATOR_LB = 7,
} DcOperator;

// Operators plus the neighbor graph they were built on.
typedef struct DcOperatorSet DcOperatorSet;

// Block parameters.
typedef struct DcParams DcParams;

// Summary of a built operator set.
typedef struct {
  size_t n_points;
  size_t k;
  double lambda;
  double grad_norm;
  double div_norm;
} DcInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Build the operator set of `n_points` positions (`n_points × 3`).
//
// `normals` may be null, in which case normals are estimated by PCA over
// the same `k` neighbors. On success `*out` owns a handle to release with
// [`dc_operator_set_free`].
//
// # Safety
// `positions` (and `normals` if not null) must hold `3 * n_points` doubles;
// `out` must be valid for writes.
DcStatus dc_operator_set_build(const double *positions,
                               const double *normals,
                               size_t n_points,
                               size_t k,
                               double lambda,
                               DcOperatorSet **out);

// Release a handle from [`dc_operator_set_build`]. Null is ignored.
//
// # Safety
// `set` must be null or a live handle, not used afterwards.
void dc_operator_set_free(DcOperatorSet *set);

// # Safety
// `set` must be a live handle and `info` valid for writes.
DcStatus dc_operator_set_info(const DcOperatorSet *set, DcInfo *info);

// Shape and stored-entry count of one operator.
//
// # Safety
// `set` must be a live handle; the outputs must be valid for writes.
DcStatus dc_operator_shape(const DcOperatorSet *set,
                           DcOperator op,
                           size_t *rows,
                           size_t *cols,
                           size_t *nnz);

// Copy the entries of one operator in row-major order (0-based indices).
// Each output buffer must hold `capacity >= nnz` elements.
//
// # Safety
// `set` must be a live handle; each buffer must hold `capacity` elements.
DcStatus dc_operator_triplets(const DcOperatorSet *set,
                              DcOperator op,
                              size_t *row_idx,
                              size_t *col_idx,
                              double *values,
                              size_t capacity);

// `out = op · x` for `x` with `cols(op) × channels` entries; `out` receives
// `rows(op) × channels`.
//
// # Safety
// `set` must be a live handle and the buffers sized as above.
DcStatus dc_apply(const DcOperatorSet *set,
                  DcOperator op,
                  const double *x,
                  size_t channels,
                  double *out);

// Initial vector features `Ĝ x0`: `x0` is `N × channels`, `out` is
// `2N × channels`.
//
// # Safety
// `set` must be a live handle and the buffers sized as above.
DcStatus dc_input_vector_features(const DcOperatorSet *set,
                                  const double *x0,
                                  size_t channels,
                                  double *out);

// Parse block parameters from a NUL-terminated JSON string.
//
// # Safety
// `json` must be a valid C string and `out` valid for writes.
DcStatus dc_params_from_json(const char *json, DcParams **out);

// Release a handle from [`dc_params_from_json`]. Null is ignored.
//
// # Safety
// `params` must be null or a live handle, not used afterwards.
void dc_params_free(DcParams *params);

// Scalar and vector output channel counts of a block.
//
// # Safety
// `params` must be a live handle; the outputs must be valid for writes.
DcStatus dc_params_output_channels(const DcParams *params,
                                   size_t *scalar_channels,
                                   size_t *vector_channels);

// One block forward pass.
//
// `x` is `N × c_x`. `v` is `2N × c_v`, or null to start from `Ĝ x`, in
// which case `c_v` must equal `c_x`. Outputs are `N × c_out` and
// `2N × v_out` per [`dc_params_output_channels`].
//
// # Safety
// Handles must be live and the buffers sized as above.
DcStatus dc_forward(const DcOperatorSet *set,
                    const DcParams *params,
                    const double *x,
                    size_t c_x,
                    const double *v,
                    size_t c_v,
                    double *x_out,
                    double *v_out);

// Copy the calling thread's last error message into `buf` (truncated,
// always NUL-terminated when `len > 0`). Returns the full message length
// in bytes, excluding the terminator.
//
// # Safety
// `buf` must be null or hold `len` bytes.
size_t dc_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DELTACONV_H */
