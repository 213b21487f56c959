#ifndef SHADOW_RECOVERY_H
#define SHADOW_RECOVERY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SrStatus {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_UTF8 = 2,
  SR_STATUS_INVALID_ARGUMENT = 3,
  SR_STATUS_PARSE = 4,
  SR_STATUS_BELOW_FLOOR = 5,
  SR_STATUS_RECOVERY = 6,
  SR_STATUS_BUFFER_TOO_SMALL = 7,
  SR_STATUS_PANIC = 8,
} SrStatus;

typedef struct SrChannel SrChannel;

typedef struct SrEigenvalues SrEigenvalues;

typedef struct SrObservable SrObservable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Owned by the library.
 */
const char *sr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sr_version(void);

/**
 * Builds a channel from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SrStatus sr_channel_from_json(const char *json, struct SrChannel **out);

/**
 * The two-qubit product Pauli channel used by the reference experiment.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SrStatus sr_channel_reference(struct SrChannel **out);

/**
 * # Safety
 * `channel` must be null or a handle from this library that has not been freed.
 */
void sr_channel_free(struct SrChannel *channel);

/**
 * Number of qubits, or 0 for a null handle.
 *
 * # Safety
 * `channel` must be null or a live handle.
 */
size_t sr_channel_num_qubits(const struct SrChannel *channel);

/**
 * Exact `2^{-n} tr(P E(P))` for the Pauli label `pauli_label`.
 *
 * # Safety
 * `channel` must be a live handle, `pauli_label` NUL-terminated and `out` valid.
 */
enum SrStatus sr_channel_eigenvalue(const struct SrChannel *channel,
                                    const char *pauli_label,
                                    double *out);

/**
 * Parses `<label> <coefficient>` lines.
 *
 * # Safety
 * `text` must be NUL-terminated and `out` valid.
 */
enum SrStatus sr_observable_parse(const char *text, struct SrObservable **out);

/**
 * Reference Heisenberg chain on `n` qubits, normalized to unit spectral norm.
 *
 * # Safety
 * `out` must be valid.
 */
enum SrStatus sr_observable_heisenberg(size_t n, bool field_on_all, struct SrObservable **out);

/**
 * # Safety
 * `observable` must be null or a live handle.
 */
void sr_observable_free(struct SrObservable *observable);

/**
 * Number of Pauli terms, or 0 for a null handle.
 *
 * # Safety
 * `observable` must be null or a live handle.
 */
size_t sr_observable_len(const struct SrObservable *observable);

/**
 * Term `index` in label order. Writes the NUL-terminated label into `label` (`capacity`
 * bytes, at least qubits + 1) and the coefficient into `coefficient`.
 *
 * # Safety
 * `observable` must be a live handle, `label` must hold `capacity` bytes and `coefficient`
 * must be valid.
 */
enum SrStatus sr_observable_term(const struct SrObservable *observable,
                                 size_t index,
                                 char *label,
                                 size_t capacity,
                                 double *coefficient);

/**
 * Eigenvalue estimates for every Pauli of weight `1..=k` from `shadows` simulated channel
 * shadows.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid.
 */
enum SrStatus sr_learn_eigenvalues(const struct SrChannel *channel,
                                   uint64_t shadows,
                                   size_t k,
                                   uint64_t seed,
                                   struct SrEigenvalues **out);

/**
 * Exact eigenvalues of a Pauli channel for every Pauli of weight `1..=k`.
 *
 * # Safety
 * `channel` must be a live handle and `out` valid.
 */
enum SrStatus sr_exact_eigenvalues(const struct SrChannel *channel,
                                   size_t k,
                                   struct SrEigenvalues **out);

/**
 * # Safety
 * `estimates` must be null or a live handle.
 */
void sr_eigenvalues_free(struct SrEigenvalues *estimates);

/**
 * Estimate for one Pauli label. The identity always gives 1.
 *
 * # Safety
 * `estimates` must be a live handle, `pauli_label` NUL-terminated and `out` valid.
 */
enum SrStatus sr_eigenvalues_get(const struct SrEigenvalues *estimates,
                                 const char *pauli_label,
                                 double *out);

/**
 * Divides each estimate by `factor^{|P|}` in place.
 *
 * # Safety
 * `estimates` must be a live handle.
 */
enum SrStatus sr_eigenvalues_divide_spam(struct SrEigenvalues *estimates, double factor);

/**
 * Rescaled observable `Σ α_P / λ̂_P · P`. Eigenvalues below `floor` in magnitude fail with
 * `SR_STATUS_BELOW_FLOOR`.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum SrStatus sr_backward_observable(const struct SrObservable *observable,
                                     const struct SrEigenvalues *estimates,
                                     double floor,
                                     struct SrObservable **out);

/**
 * `f = Σ ᾱ_P ⟨P⟩` from caller-supplied noisy expectations, given as `count` parallel
 * arrays of Pauli labels and values.
 *
 * # Safety
 * Handles must be live, `labels` and `values` must hold `count` entries each, and `out`
 * must be valid.
 */
enum SrStatus sr_recover_expectation(const struct SrObservable *observable,
                                     const struct SrEigenvalues *estimates,
                                     double floor,
                                     const char *const *labels,
                                     const double *values,
                                     size_t count,
                                     double *out);

/**
 * Runs recovery on a Haar-random state through `channel`, with exact noisy expectations.
 * Writes the recovered value, the ideal `tr(O σ)` and the unprocessed `tr(O E(σ))`.
 *
 * # Safety
 * Handles must be live and the three output pointers valid.
 */
enum SrStatus sr_recover_haar_state(const struct SrChannel *channel,
                                    const struct SrObservable *observable,
                                    const struct SrEigenvalues *estimates,
                                    double floor,
                                    uint64_t state_seed,
                                    double *recovered,
                                    double *ideal,
                                    double *unmitigated);

/**
 * Number of channel shadows for accuracy `epsilon` with failure probability `delta`.
 * Fails with `SR_STATUS_INVALID_ARGUMENT` if the count does not fit in 64 bits.
 *
 * # Safety
 * `out` must be valid.
 */
enum SrStatus sr_plan_sample_size(double epsilon,
                                  double delta,
                                  size_t n,
                                  size_t k,
                                  size_t d,
                                  double lambda_min,
                                  uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHADOW_RECOVERY_H */
