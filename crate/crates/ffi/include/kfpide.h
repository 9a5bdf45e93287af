#ifndef KFPIDE_H
#define KFPIDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum KfStatus {
  KF_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or an out-of-range enum value.
   */
  KF_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Parameter, domain or capability error.
   */
  KF_STATUS_VALIDATION = 2,
  /**
   * Numerical consistency, coverage, convergence or resource error.
   */
  KF_STATUS_NUMERICAL = 3,
  KF_STATUS_IO = 4,
  /**
   * A panic was caught at the boundary.
   */
  KF_STATUS_INTERNAL = 5,
} KfStatus;

typedef enum KfContractKind {
  KF_CONTRACT_KIND_CALL = 0,
  KF_CONTRACT_KIND_PUT = 1,
  /**
   * Cash-or-nothing call; `extra` is the payout.
   */
  KF_CONTRACT_KIND_DIGITAL = 2,
  /**
   * Down-and-out call; `extra` is the barrier.
   */
  KF_CONTRACT_KIND_DOWN_AND_OUT_CALL = 3,
} KfContractKind;

typedef enum KfRoute {
  KF_ROUTE_AUTO = 0,
  KF_ROUTE_SERIES = 1,
  KF_ROUTE_QUADRATURE = 2,
} KfRoute;

/**
 * Opaque contract handle.
 */
typedef struct KfContract KfContract;

/**
 * Opaque model handle.
 */
typedef struct KfModel KfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a model. `law` uses the `kind:params` syntax (e.g.
 * `normal:-0.1:0.15`); `transform` is `identity` or `exp_minus_one`.
 *
 * # Safety
 * `law` and `transform` must be null or NUL-terminated strings; `out` must
 * be null or valid for a pointer write.
 */
enum KfStatus kf_model_new(double spot,
                           double rate,
                           double sigma,
                           double intensity_q,
                           const char *law,
                           const char *transform,
                           struct KfModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must be null or a pointer from [`kf_model_new`] not yet freed.
 */
void kf_model_free(struct KfModel *model);

/**
 * Creates a contract of kind `kind` (a [`KfContractKind`] value).
 * `extra` is the payout of a digital or the barrier of a down-and-out
 * call and is ignored otherwise.
 *
 * # Safety
 * `out` must be null or valid for a pointer write.
 */
enum KfStatus kf_contract_new(int kind,
                              double strike,
                              double maturity,
                              double valuation_time,
                              double extra,
                              struct KfContract **out);

/**
 * Releases a contract; null is ignored.
 *
 * # Safety
 * `contract` must be null or a pointer from [`kf_contract_new`] not yet
 * freed.
 */
void kf_contract_free(struct KfContract *contract);

/**
 * Prices `contract` under `model` with default numerics along `route`
 * (a [`KfRoute`] value).
 *
 * # Safety
 * Handles must be live; `out_price` must be valid for a write.
 */
enum KfStatus kf_price(const struct KfModel *model,
                       const struct KfContract *contract,
                       int route,
                       double *out_price);

/**
 * Monte Carlo estimate and standard error (NaN for one path).
 *
 * # Safety
 * Handles must be live; output pointers must be valid for writes.
 */
enum KfStatus kf_simulate(const struct KfModel *model,
                          const struct KfContract *contract,
                          uint64_t n_paths,
                          uint64_t n_steps,
                          uint64_t seed,
                          bool bridge_correction,
                          double *out_estimate,
                          double *out_std_error);

/**
 * Density of `ln S_t` given `ln S_s = ln S` on the grid
 * `[x_min, x_max)` with `n_points` nodes (a power of two). Fills the node
 * locations, the continuous density and the atom mass per node.
 *
 * # Safety
 * Each output array must hold `n_points` doubles.
 */
enum KfStatus kf_density(const struct KfModel *model,
                         double s,
                         double t,
                         double x_min,
                         double x_max,
                         size_t n_points,
                         double *out_y,
                         double *out_density,
                         double *out_atom_mass);

/**
 * Message of the last failed call on this thread, or an empty string.
 * Valid until the next call into the library on the same thread.
 */
const char *kf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *kf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KFPIDE_H */
