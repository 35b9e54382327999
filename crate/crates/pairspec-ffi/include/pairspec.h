#ifndef PAIRSPEC_H
#define PAIRSPEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum {
  PAIRSPEC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  PAIRSPEC_STATUS_NULL_POINTER = 1,
  /**
   * A scalar argument was outside its domain.
   */
  PAIRSPEC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Model parameters violate the model invariants.
   */
  PAIRSPEC_STATUS_INVALID_MODEL = 3,
  /**
   * The requested quantity is undefined for these inputs.
   */
  PAIRSPEC_STATUS_UNDEFINED = 4,
  /**
   * A background correction produced a visibility above one.
   */
  PAIRSPEC_STATUS_INCONSISTENT = 5,
  /**
   * The provided buffer does not match the requested grid.
   */
  PAIRSPEC_STATUS_BUFFER_SIZE = 6,
} PairspecStatus;

/**
 * Opaque handle to a validated joint-spectrum model.
 */
typedef struct PairspecModel PairspecModel;

/**
 * Model parameters, mirroring the JSON model schema.
 */
typedef struct {
  double lambda1_center_nm;
  double lambda2_center_nm;
  double sigma1_nm;
  double sigma2_nm;
  double sigma12_nm2;
  double amplitude;
} PairspecModelParams;

/**
 * Rectangular wavelength grid; pixel (i, j) maps to
 * (start1 + i * step1, start2 + j * step2), row-major in the value buffers.
 */
typedef struct {
  double start1_nm;
  double step1_nm;
  size_t count1;
  double start2_nm;
  double step2_nm;
  size_t count2;
} PairspecGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Validates parameters and allocates a model handle. The handle must be
 * released with [`pairspec_model_free`].
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PairspecStatus pairspec_model_new(double lambda1_center_nm,
                                  double lambda2_center_nm,
                                  double sigma1_nm,
                                  double sigma2_nm,
                                  double sigma12_nm2,
                                  double amplitude,
                                  PairspecModel **out);

/**
 * Releases a model handle. Null is accepted and ignored.
 *
 * # Safety
 * `model` must be null or a pointer returned by this library, not yet freed.
 */
void pairspec_model_free(PairspecModel *model);

/**
 * Copies the model parameters out of a handle.
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
PairspecStatus pairspec_model_params(const PairspecModel *model, PairspecModelParams *out);

/**
 * Allocates the mirrored decay path's model: centers and widths swapped,
 * covariance and amplitude unchanged.
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
PairspecStatus pairspec_model_mirror(const PairspecModel *model, PairspecModel **out);

/**
 * Joint spectral rate at one wavelength pair.
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
PairspecStatus pairspec_model_eval(const PairspecModel *model,
                                   double lambda1_nm,
                                   double lambda2_nm,
                                   double *out);

/**
 * FWHM of one arm's marginal spectrum; `arm` is 1 or 2.
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
PairspecStatus pairspec_model_marginal_fwhm(const PairspecModel *model, uint32_t arm, double *out);

/**
 * Normalized decay-path amplitudes from the two local rates.
 *
 * # Safety
 * `a_out` and `b_out` must be valid pointers.
 */
PairspecStatus pairspec_path_amplitudes(double g_hv, double g_vh, double *a_out, double *b_out);

/**
 * Joint transmission probability through both linear analyzers (arm-1 angle
 * from H, arm-2 angle from V).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PairspecStatus pairspec_coincidence_prob(double a,
                                         double b,
                                         double phase_rad,
                                         double alpha1_deg,
                                         double alpha2_deg,
                                         double *out);

/**
 * Analyzer-2 angle of maximum coincidence at analyzer 1 fixed to +45
 * degrees, in (-90, 90].
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PairspecStatus pairspec_max_coincidence_angle(double a, double b, double phase_rad, double *out);

/**
 * Entanglement entropy of the two-path state, in bits.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PairspecStatus pairspec_entropy_bits(double a, double b, double *out);

/**
 * Visibility of the analyzer-2 scan at analyzer 1 fixed to +45 degrees.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PairspecStatus pairspec_visibility_45(double a, double b, double phase_rad, double *out);

/**
 * Removes a flat accidental background of fractional rate `rho` from a
 * measured visibility.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PairspecStatus pairspec_correct_fourphoton(double v_measured, double rho, double *out);

/**
 * Fills `values` (row-major, `count1 * count2` entries) with the
 * coincidence-rate map of the two-path source at one analyzer setting.
 *
 * # Safety
 * `model` must be a valid handle and `values` must point to `len` writable
 * doubles.
 */
PairspecStatus pairspec_rate_map(const PairspecModel *model,
                                 double phase_rad,
                                 PairspecGrid grid,
                                 double alpha1_deg,
                                 double alpha2_deg,
                                 double *values,
                                 size_t len);

/**
 * Fills `values` with one Poisson-sampled count map: per pixel an
 * independent draw with mean (rate + flat background) * integration time,
 * deterministic in `seed`.
 *
 * # Safety
 * `model` must be a valid handle and `values` must point to `len` writable
 * 64-bit unsigned integers.
 */
PairspecStatus pairspec_count_map(const PairspecModel *model,
                                  double phase_rad,
                                  double background_fraction,
                                  PairspecGrid grid,
                                  double alpha1_deg,
                                  double alpha2_deg,
                                  double integration_s,
                                  uint64_t seed,
                                  uint64_t *values,
                                  size_t len);

/**
 * Static description of a status code.
 */
const char *pairspec_status_message(PairspecStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAIRSPEC_H */
