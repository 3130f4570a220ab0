/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SPIRALSPEC_H
#define SPIRALSPEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ss_status {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_SINGULAR = 3,
  SS_STATUS_NO_CONVERGENCE = 4,
  /**
   * Time stepping relaxed to a homogeneous state instead of a pattern.
   */
  SS_STATUS_DECAYED = 5,
  SS_STATUS_EMPTY_GAP = 6,
  SS_STATUS_CONFIG = 7,
  SS_STATUS_IO = 8,
  /**
   * The output buffer is shorter than the result; the count is still set.
   */
  SS_STATUS_BUFFER_TOO_SMALL = 9,
  /**
   * One or more pipeline tasks failed; see the run manifest.
   */
  SS_STATUS_TASK_FAILED = 10,
  SS_STATUS_INTERNAL = 99,
} ss_status;

typedef struct ss_model ss_model;

typedef struct ss_spiral ss_spiral;

typedef struct ss_wavetrain ss_wavetrain;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating to `len`. Returns the length the full
 * message needs, including the terminator; an empty message means the
 * last call succeeded.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t ss_last_error(char *buf, size_t len);

/**
 * Barkley kinetics `u_t = Δu + u(1-u)(u-(v+b)/a)/eps`, `v_t = delta Δv + u - v`.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum ss_status ss_model_barkley(double a,
                                double b,
                                double eps,
                                double delta,
                                struct ss_model **out);

/**
 * # Safety
 * `model` must come from `ss_model_barkley` and not be used afterwards.
 */
void ss_model_free(struct ss_model *model);

/**
 * Eigenvalues nearest `shift` of the weighted convection-diffusion
 * operator on an interval of length `r` with Dirichlet ends, finite
 * differences of step `h`.
 *
 * # Safety
 * `re` and `im` must hold `capacity` doubles; `count` one `size_t`.
 */
enum ss_status ss_convdiff_eigenvalues(double c,
                                       double r,
                                       double h,
                                       double eta,
                                       size_t k,
                                       double shift_re,
                                       double shift_im,
                                       double tol,
                                       double *re,
                                       double *im,
                                       size_t capacity,
                                       size_t *count);

/**
 * Smallest singular value of the weighted convection-diffusion operator
 * minus `lambda`.
 *
 * # Safety
 * `sigma` must be valid for one write.
 */
enum ss_status ss_convdiff_sigma_min(double c,
                                     double r,
                                     double h,
                                     double eta,
                                     double lambda_re,
                                     double lambda_im,
                                     double *sigma);

/**
 * Periodic wave train of wavenumber `k`, started from a ring simulation.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for one pointer write.
 */
enum ss_status ss_wavetrain_solve(const struct ss_model *model,
                                  double k,
                                  struct ss_wavetrain **out);

/**
 * # Safety
 * `wt` must be a live handle and `omega` valid for one write.
 */
enum ss_status ss_wavetrain_omega(const struct ss_wavetrain *wt, double *omega);

/**
 * # Safety
 * `wt` must come from `ss_wavetrain_solve` and not be used afterwards.
 */
void ss_wavetrain_free(struct ss_wavetrain *wt);

/**
 * Rigidly rotating spiral on the disk of radius `radius` with Neumann
 * boundary: time stepping from a broken front (`steps` of size `dt` on a
 * grid of radial spacing `bootstrap_h_r`), then Newton on the grid
 * `h_r x n_theta`. Returns `SS_STATUS_DECAYED` when the disk is too small
 * to sustain rotation.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for one pointer write.
 */
enum ss_status ss_spiral_solve(const struct ss_model *model,
                               double radius,
                               double h_r,
                               size_t n_theta,
                               double bootstrap_h_r,
                               size_t steps,
                               double dt,
                               struct ss_spiral **out);

/**
 * Continues `spiral` to a disk of radius `radius` with the same grid spacing.
 *
 * # Safety
 * `spiral` must be a live handle and `out` valid for one pointer write.
 */
enum ss_status ss_spiral_extend(const struct ss_spiral *spiral,
                                double radius,
                                struct ss_spiral **out);

/**
 * Rotation frequency and far-field wavenumber. Either output may be null.
 *
 * # Safety
 * `spiral` must be a live handle; non-null outputs valid for one write.
 */
enum ss_status ss_spiral_info(const struct ss_spiral *spiral, double *omega, double *k_far);

/**
 * # Safety
 * `spiral` must come from a spiral constructor and not be used afterwards.
 */
void ss_spiral_free(struct ss_spiral *spiral);

/**
 * `k` eigenvalues nearest `shift` of the linearization about `spiral`,
 * conjugated by `exp(eta r)`.
 *
 * # Safety
 * `spiral` must be a live handle; `re` and `im` must hold `capacity`
 * doubles and `count` one `size_t`.
 */
enum ss_status ss_spiral_eigenvalues(const struct ss_spiral *spiral,
                                     double eta,
                                     size_t k,
                                     double shift_re,
                                     double shift_im,
                                     double tol,
                                     double *re,
                                     double *im,
                                     size_t capacity,
                                     size_t *count);

/**
 * `log10` of the 1-norm condition number and the smallest singular value
 * of the weighted linearization minus `lambda`. Either output may be null.
 *
 * # Safety
 * `spiral` must be a live handle; non-null outputs valid for one write.
 */
enum ss_status ss_spiral_condition(const struct ss_spiral *spiral,
                                   double eta,
                                   double lambda_re,
                                   double lambda_im,
                                   double *log10_kappa,
                                   double *sigma_min);

/**
 * Runs the task pipeline of a JSON run config, writing into the config's
 * output directory, or into `output_dir` when it is non-null. Returns
 * `SS_STATUS_TASK_FAILED` when the run finished but some task failed.
 *
 * # Safety
 * `config_json` must be a NUL-terminated UTF-8 string; `output_dir` null
 * or NUL-terminated.
 */
enum ss_status ss_run_config(const char *config_json, const char *output_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPIRALSPEC_H */
