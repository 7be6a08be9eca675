#ifndef LLLROUND_H
#define LLLROUND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LllStatus {
  LLL_STATUS_OK = 0,
  LLL_STATUS_NULL_POINTER = 1,
  LLL_STATUS_INVALID_UTF8 = 2,
  LLL_STATUS_DOMAIN = 3,
  LLL_STATUS_PARSE = 4,
  LLL_STATUS_VALIDATION = 5,
  LLL_STATUS_DIMENSION = 6,
  LLL_STATUS_INFEASIBLE = 7,
  LLL_STATUS_GENERATION = 8,
  LLL_STATUS_BUDGET = 9,
  LLL_STATUS_PRECONDITION = 10,
  LLL_STATUS_PARAMETER_SEARCH = 11,
  LLL_STATUS_INTERNAL = 12,
  LLL_STATUS_IO = 13,
  LLL_STATUS_BUFFER_TOO_SMALL = 14,
  LLL_STATUS_WRONG_KIND = 15,
  LLL_STATUS_PANIC = 16,
} LllStatus;

/**
 * Parsed CIP or MIP instance.
 */
typedef struct LllInstance LllInstance;

/**
 * Las Vegas MIP rounding result.
 */
typedef struct LllMipResult LllMipResult;

/**
 * Derandomized CIP solution.
 */
typedef struct LllRounded LllRounded;

/**
 * Fractional solution x* with its objective.
 */
typedef struct LllSolution LllSolution;

/**
 * Overrides for [`lll_derandomize`]; NaN keeps the default.
 */
typedef struct LllRoundOptions {
  double alpha;
  double beta;
  double lambda;
} LllRoundOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread ("" after a success).
 * Valid until the next call into the library on this thread.
 */
const char *lll_last_error(void);

/**
 * Static, nul-terminated version string.
 */
const char *lll_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void lll_string_free(char *s);

/**
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum LllStatus lll_instance_from_json(const char *json, struct LllInstance **out);

/**
 * Canonical JSON of the instance; free with [`lll_string_free`].
 *
 * # Safety
 * `inst` must be a live handle; `out` must be writable.
 */
enum LllStatus lll_instance_to_json(const struct LllInstance *inst, char **out);

/**
 * 0 for a CIP, 1 for a MIP, -1 for NULL.
 *
 * # Safety
 * `inst` must be NULL or a live handle.
 */
int32_t lll_instance_kind(const struct LllInstance *inst);

/**
 * Rows and columns of the constraint matrix.
 *
 * # Safety
 * `inst` must be a live handle; `rows` and `cols` writable.
 */
enum LllStatus lll_instance_dims(const struct LllInstance *inst, size_t *rows, size_t *cols);

/**
 * # Safety
 * `inst` must be NULL or a handle not yet freed.
 */
void lll_instance_free(struct LllInstance *inst);

/**
 * Solves the LP relaxation (first objective for CIPs).
 *
 * # Safety
 * `inst` must be a live handle; `out` writable.
 */
enum LllStatus lll_solve_lp(const struct LllInstance *inst, struct LllSolution **out);

/**
 * Validates an external x* of length `n` against the instance.
 *
 * # Safety
 * `x` must point to `n` doubles; `inst` live; `out` writable.
 */
enum LllStatus lll_solution_from_values(const struct LllInstance *inst,
                                        const double *x,
                                        size_t n,
                                        struct LllSolution **out);

/**
 * y* of the solution; NaN for NULL.
 *
 * # Safety
 * `sol` must be NULL or a live handle.
 */
double lll_solution_objective(const struct LllSolution *sol);

/**
 * # Safety
 * `sol` live; `buf` NULL or `len` writable doubles; `written` writable.
 */
enum LllStatus lll_solution_values(const struct LllSolution *sol,
                                   double *buf,
                                   size_t len,
                                   size_t *written);

/**
 * # Safety
 * `sol` must be NULL or a handle not yet freed.
 */
void lll_solution_free(struct LllSolution *sol);

/**
 * Deterministic rounding of a CIP solution. `options` may be NULL.
 *
 * # Safety
 * `inst`, `sol` live; `options` NULL or readable; `out` writable.
 */
enum LllStatus lll_derandomize(const struct LllInstance *inst,
                               const struct LllSolution *sol,
                               const struct LllRoundOptions *options,
                               struct LllRounded **out);

/**
 * c·z for the first objective; NaN for NULL.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
double lll_rounded_value(const struct LllRounded *r);

/**
 * # Safety
 * `r` must be NULL or a live handle.
 */
bool lll_rounded_feasible(const struct LllRounded *r);

/**
 * Estimator evaluations spent; 0 for NULL.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
size_t lll_rounded_phi_evaluations(const struct LllRounded *r);

/**
 * # Safety
 * `r` live; `buf` NULL or `len` writable entries; `written` writable.
 */
enum LllStatus lll_rounded_z(const struct LllRounded *r,
                             uint64_t *buf,
                             size_t len,
                             size_t *written);

/**
 * # Safety
 * `r` must be NULL or a handle not yet freed.
 */
void lll_rounded_free(struct LllRounded *r);

/**
 * Repeated randomized rounding of a MIP until the load target is met
 * or `max_tries` trials are spent. Not reaching the target is not an
 * error; check [`lll_mip_result_success`].
 *
 * # Safety
 * `inst`, `sol` live; `out` writable.
 */
enum LllStatus lll_las_vegas(const struct LllInstance *inst,
                             const struct LllSolution *sol,
                             size_t max_tries,
                             uint64_t seed,
                             struct LllMipResult **out);

/**
 * Max row load of the best selection; NaN for NULL.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
double lll_mip_result_value(const struct LllMipResult *r);

/**
 * Load target y* + k; NaN for NULL.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
double lll_mip_result_target(const struct LllMipResult *r);

/**
 * # Safety
 * `r` must be NULL or a live handle.
 */
size_t lll_mip_result_trials_used(const struct LllMipResult *r);

/**
 * # Safety
 * `r` must be NULL or a live handle.
 */
bool lll_mip_result_success(const struct LllMipResult *r);

/**
 * Chosen slot per group.
 *
 * # Safety
 * `r` live; `buf` NULL or `len` writable entries; `written` writable.
 */
enum LllStatus lll_mip_result_slots(const struct LllMipResult *r,
                                    size_t *buf,
                                    size_t len,
                                    size_t *written);

/**
 * # Safety
 * `r` must be NULL or a handle not yet freed.
 */
void lll_mip_result_free(struct LllMipResult *r);

/**
 * Chernoff tail G(μ, δ).
 *
 * # Safety
 * `out` must be writable.
 */
enum LllStatus lll_chernoff_g(double mu, double delta, double *out);

/**
 * Smallest grid δ with ⌈μδ⌉·G(μ, δ) ≤ p.
 *
 * # Safety
 * `out` must be writable.
 */
enum LllStatus lll_solve_h(double mu, double p, double *out);

/**
 * (α·e^{1−α})^B.
 *
 * # Safety
 * `out` must be writable.
 */
enum LllStatus lll_g_of(double min_demand, double alpha, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LLLROUND_H */
