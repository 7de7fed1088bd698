#ifndef HJB_TRANSMISSION_H
#define HJB_TRANSMISSION_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HjbStatus {
  HJB_STATUS_OK = 0,
  HJB_STATUS_NULL_POINTER = 1,
  HJB_STATUS_INVALID_UTF8 = 2,
  HJB_STATUS_CONFIG = 3,
  HJB_STATUS_VALIDATION = 4,
  HJB_STATUS_INFEASIBLE = 5,
  HJB_STATUS_USAGE = 6,
  HJB_STATUS_INTERNAL = 7,
  HJB_STATUS_IO = 8,
  HJB_STATUS_BUFFER_TOO_SMALL = 9,
  HJB_STATUS_PANIC = 10,
} HjbStatus;

typedef enum HjbRule {
  HJB_RULE_RELAXED = 0,
  HJB_RULE_STRONG = 1,
} HjbRule;

/**
 * Opaque problem handle.
 */
typedef struct HjbProblem HjbProblem;

/**
 * Opaque solution handle.
 */
typedef struct HjbSolution HjbSolution;

/**
 * Closed-form annulus constants.
 */
typedef struct HjbAnnulus {
  double a;
  double b;
  double rho;
  double slope_at_rho;
} HjbAnnulus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *hjb_last_error(void);

/**
 * Parses an experiment configuration and builds the problem.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum HjbStatus hjb_problem_from_json(const char *json, struct HjbProblem **out);

/**
 * # Safety
 * `p` must come from `hjb_problem_from_json` (or be null) and not be used afterwards.
 */
void hjb_problem_free(struct HjbProblem *p);

/**
 * Number of grid nodes (including boundary and exterior nodes).
 *
 * # Safety
 * `p` must be a live problem handle; `out` must be writable.
 */
enum HjbStatus hjb_problem_node_count(const struct HjbProblem *p, size_t *out);

/**
 * Solves with the given interface rule.
 *
 * # Safety
 * `p` must be a live problem handle; `out` must be writable.
 */
enum HjbStatus hjb_solve(const struct HjbProblem *p, enum HjbRule rule, struct HjbSolution **out);

/**
 * Copies the nodal values (NaN at exterior nodes) into `buf`.
 * Fails with `BufferTooSmall` if `len` is below the node count.
 *
 * # Safety
 * `s` must be a live solution handle; `buf` must hold `len` doubles.
 */
enum HjbStatus hjb_solution_values(const struct HjbSolution *s, double *buf, size_t len);

/**
 * Solver diagnostics as JSON, owned by the solution handle.
 *
 * # Safety
 * `s` must be a live solution handle or null.
 */
const char *hjb_solution_diagnostics(const struct HjbSolution *s);

/**
 * # Safety
 * `s` must come from `hjb_solve` (or be null) and not be used afterwards.
 */
void hjb_solution_free(struct HjbSolution *s);

/**
 * Runs the discrete viscosity checks. `tol <= 0` selects `10h`.
 * `worst` receives the largest violation residual (0 when passing).
 *
 * # Safety
 * Handles must be live and belong together; output pointers must be writable.
 */
enum HjbStatus hjb_verify(const struct HjbProblem *p,
                          const struct HjbSolution *s,
                          enum HjbRule rule,
                          double tol,
                          bool *pass,
                          double *worst);

/**
 * Closed-form 1D solution with `u(-1) = 0`, `u(1) = alpha` at `x`.
 * `Infeasible` for `alpha < -2`.
 *
 * # Safety
 * `out` must be writable.
 */
enum HjbStatus hjb_oracle1d_eval(double alpha, double x, double *out);

/**
 * Annulus constants; a NaN `rho` selects the radius where the slope constraint binds.
 *
 * # Safety
 * `out` must be writable.
 */
enum HjbStatus hjb_annulus_solve(uint32_t n,
                                 double r,
                                 double big_r,
                                 double rho,
                                 struct HjbAnnulus *out);

/**
 * `M⁺` (or `M⁻` when `plus` is false) of the row-major symmetric `dim × dim` matrix.
 *
 * # Safety
 * `m` must hold `dim * dim` doubles; `out` must be writable.
 */
enum HjbStatus hjb_pucci(const double *m,
                         size_t dim,
                         double lambda,
                         double lambda_bar,
                         bool plus,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HJB_TRANSMISSION_H */
