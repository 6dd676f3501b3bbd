#ifndef NNMCERT_H
#define NNMCERT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum NnmStatus {
  NNM_STATUS_OK = 0,
  NNM_STATUS_NULL_POINTER = 1,
  NNM_STATUS_SHAPE = 2,
  NNM_STATUS_FIELD = 3,
  NNM_STATUS_NUMERICAL = 4,
  NNM_STATUS_DEGENERATE = 5,
  NNM_STATUS_PRECONDITION = 6,
  NNM_STATUS_INFEASIBLE = 7,
  NNM_STATUS_PARSE = 8,
  NNM_STATUS_IO = 9,
  NNM_STATUS_PANIC = 10,
} NnmStatus;

/*
 Certificate outcome.
 */
typedef enum NnmCertStatus {
  NNM_CERT_STATUS_UNIQUE = 0,
  NNM_CERT_STATUS_NOT_UNIQUE = 1,
  NNM_CERT_STATUS_INCONCLUSIVE = 2,
} NnmCertStatus;

typedef struct NnmCertificate NnmCertificate;

typedef struct NnmMatrix NnmMatrix;

typedef struct NnmOperator NnmOperator;

typedef struct NnmSolverResult NnmSolverResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *nnm_last_error_message(void);

/*
 Releases a string returned by this library.

 # Safety
 `s` must come from this library or be null.
 */
void nnm_string_free(char *s);

/*
 Real matrix from `rows * cols` row-major entries.

 # Safety
 `data` must point to `rows * cols` doubles; `out` must be writable.
 */
enum NnmStatus nnm_matrix_new_real(size_t rows,
                                   size_t cols,
                                   const double *data,
                                   struct NnmMatrix **out);

/*
 Complex matrix from row-major real and imaginary parts.

 # Safety
 `re` and `im` must each point to `rows * cols` doubles; `out` must be writable.
 */
enum NnmStatus nnm_matrix_new_complex(size_t rows,
                                      size_t cols,
                                      const double *re,
                                      const double *im,
                                      struct NnmMatrix **out);

/*
 Parses the matrix JSON format `{"rows", "cols", "field", "data"}`.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum NnmStatus nnm_matrix_from_json(const char *json, struct NnmMatrix **out);

/*
 # Safety
 `m` must be a live matrix handle; `out` must be writable. The returned
 string is released with [`nnm_string_free`].
 */
enum NnmStatus nnm_matrix_to_json(const struct NnmMatrix *m, char **out);

/*
 # Safety
 `m` must be a live matrix handle; `rows` and `cols` must be writable.
 */
enum NnmStatus nnm_matrix_shape(const struct NnmMatrix *m, size_t *rows, size_t *cols);

/*
 Entry `(i, j)` as real and imaginary parts.

 # Safety
 `m` must be a live matrix handle; `re` and `im` must be writable.
 */
enum NnmStatus nnm_matrix_get(const struct NnmMatrix *m,
                              size_t i,
                              size_t j,
                              double *re,
                              double *im);

/*
 # Safety
 `m` must be a live matrix handle; `out` must be writable.
 */
enum NnmStatus nnm_matrix_nuclear_norm(const struct NnmMatrix *m, double *out);

/*
 # Safety
 `m` must come from this library or be null.
 */
void nnm_matrix_free(struct NnmMatrix *m);

/*
 Parses the operator JSON format `{"shape", "field", "measurements"}`.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum NnmStatus nnm_operator_from_json(const char *json, struct NnmOperator **out);

/*
 Operator whose null space is exactly the span of `count` directions.

 # Safety
 `directions` must point to `count` live matrix handles; `out` must be writable.
 */
enum NnmStatus nnm_operator_with_null_span(const struct NnmMatrix *const *directions,
                                           size_t count,
                                           struct NnmOperator **out);

/*
 Number of measurements.

 # Safety
 `op` must be a live operator handle; `out` must be writable.
 */
enum NnmStatus nnm_operator_len(const struct NnmOperator *op, size_t *out);

/*
 # Safety
 `op` must come from this library or be null.
 */
void nnm_operator_free(struct NnmOperator *op);

/*
 Condition value `Re Tr(U* Q V) + ||Ubar* Q Vbar||_*` at ground truth `x`.

 # Safety
 `x` and `q` must be live matrix handles; `out` must be writable.
 */
enum NnmStatus nnm_oymak_value(const struct NnmMatrix *x, const struct NnmMatrix *q, double *out);

/*
 Certifies `x` as the unique minimizer for `op`. A NaN `band` selects the
 default zero band.

 # Safety
 `x` and `op` must be live handles; `out` must be writable.
 */
enum NnmStatus nnm_certify(const struct NnmMatrix *x,
                           const struct NnmOperator *op,
                           double band,
                           uint64_t seed,
                           struct NnmCertificate **out);

/*
 # Safety
 `c` must be a live certificate handle; `out` must be writable.
 */
enum NnmStatus nnm_certificate_status(const struct NnmCertificate *c, enum NnmCertStatus *out);

/*
 Step `t` of the non-uniqueness witness; `has_witness` is set to 0 when
 the certificate carries none.

 # Safety
 `c` must be a live certificate handle; `t` and `has_witness` must be writable.
 */
enum NnmStatus nnm_certificate_witness_t(const struct NnmCertificate *c,
                                         double *t,
                                         int32_t *has_witness);

/*
 Full certificate as JSON, released with [`nnm_string_free`].

 # Safety
 `c` must be a live certificate handle; `out` must be writable.
 */
enum NnmStatus nnm_certificate_to_json(const struct NnmCertificate *c, char **out);

/*
 # Safety
 `c` must come from this library or be null.
 */
void nnm_certificate_free(struct NnmCertificate *c);

/*
 Solves `min ||Y||_*` subject to `A(Y) = b` with default options and `seed`.
 `b_im` may be null for a real operator.

 # Safety
 `op` must be a live operator handle; `b_re` (and `b_im` when non-null)
 must point to `len` doubles; `out` must be writable.
 */
enum NnmStatus nnm_solve(const struct NnmOperator *op,
                         const double *b_re,
                         const double *b_im,
                         size_t len,
                         uint64_t seed,
                         struct NnmSolverResult **out);

/*
 # Safety
 `r` must be a live result handle; `out` must be writable.
 */
enum NnmStatus nnm_solver_result_objective(const struct NnmSolverResult *r, double *out);

/*
 Copy of the minimizer as a new matrix handle.

 # Safety
 `r` must be a live result handle; `out` must be writable.
 */
enum NnmStatus nnm_solver_result_matrix(const struct NnmSolverResult *r, struct NnmMatrix **out);

/*
 # Safety
 `r` must come from this library or be null.
 */
void nnm_solver_result_free(struct NnmSolverResult *r);

/*
 `||diag(-1, 0) + t 1 1^T||_*` in closed form.
 */
double nnm_counterexample_closed_form(double t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NNMCERT_H */
