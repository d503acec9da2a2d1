#ifndef MAGICDYN_H
#define MAGICDYN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_INVALID_ARGUMENT = 1,
  MD_STATUS_DIMENSION_MISMATCH = 2,
  MD_STATUS_SIZE_BOUND = 3,
  MD_STATUS_BOUNDS_VIOLATION = 4,
  MD_STATUS_QUADRATURE = 5,
  MD_STATUS_DEGENERATE_FIT = 6,
  MD_STATUS_IO = 7,
  MD_STATUS_NULL_POINTER = 8,
  MD_STATUS_PANIC = 9,
} MdStatus;

/**
 * Sampled disorder instance of the TFIM or the ℓ-bit model.
 */
typedef struct MdRealization MdRealization;

/**
 * Pure state on `L` qubits.
 */
typedef struct MdState MdState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into the library on this thread.
 */
const char *md_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *md_version(void);

/**
 * Product state with site `k` at Bloch angles `(theta[k], phi[k])`.
 *
 * # Safety
 * `theta` and `phi` must point to `n_qubits` doubles; `out` must be writable.
 */
enum MdStatus md_state_product(size_t n_qubits,
                               const double *theta,
                               const double *phi,
                               struct MdState **out_state);

/**
 * Named initial state (`z-random`, `x-random`, `y-random`, `x-plus`,
 * `t-product`, `bloch-random`); random families draw from `seed`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum MdStatus md_state_named(const char *name,
                             size_t n_qubits,
                             uint64_t seed,
                             struct MdState **out_state);

/**
 * State from `2^n_qubits` amplitudes given as separate real and imaginary
 * parts. The vector is normalized on input.
 *
 * # Safety
 * `re` and `im` must point to `2^n_qubits` doubles; `out` must be writable.
 */
enum MdStatus md_state_from_amplitudes(size_t n_qubits,
                                       const double *re,
                                       const double *im,
                                       struct MdState **out_state);

/**
 * Number of qubits, or 0 for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t md_state_n_qubits(const struct MdState *state);

/**
 * Copies the amplitudes into `re` and `im`, each of length `len`, which
 * must equal `2^L`.
 *
 * # Safety
 * `state` must be a live handle; `re` and `im` must point to `len` doubles.
 */
enum MdStatus md_state_amplitudes(const struct MdState *state, double *re, double *im, size_t len);

/**
 * Releases a state; null is ignored.
 *
 * # Safety
 * `state` must be null or a handle not yet freed.
 */
void md_state_free(struct MdState *state);

/**
 * Exact stabilizer Rényi entropy of index `k` (1 for the Shannon limit), in bits.
 *
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
enum MdStatus md_sre(const struct MdState *state, uint32_t k, double *out_value);

/**
 * Monte-Carlo estimate of `M_2` from `n_samples` Pauli strings with its
 * jackknife standard error.
 *
 * # Safety
 * `state` must be a live handle; both out-pointers must be writable.
 */
enum MdStatus md_sre2_sampled(const struct MdState *state,
                              size_t n_samples,
                              uint64_t seed,
                              double *out_estimate,
                              double *out_stderr);

/**
 * Weight of the `{I, Z}` Pauli strings.
 *
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
enum MdStatus md_w_z(const struct MdState *state, double *out_value);

/**
 * Von Neumann entropy, in nats, of sites `0..cut`. `cut = 0` selects the half chain.
 *
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
enum MdStatus md_entanglement_entropy(const struct MdState *state, size_t cut, double *out_value);

/**
 * `<P>` for a Pauli string written as letters, site 0 first (e.g. `"XIZY"`).
 *
 * # Safety
 * `state` must be a live handle; `pauli` a NUL-terminated string; `out` writable.
 */
enum MdStatus md_pauli_expectation(const struct MdState *state,
                                   const char *pauli,
                                   double *out_value);

/**
 * Haar average of `M_2` on `n_qubits` qubits.
 */
double md_haar_sre2(size_t n_qubits);

/**
 * Disordered TFIM with on-site fields uniform in `[-w, w]`, unit transverse
 * field and default couplings.
 *
 * # Safety
 * `out` must be writable.
 */
enum MdStatus md_realization_tfim(size_t n_sites,
                                  double w,
                                  uint64_t seed,
                                  struct MdRealization **out_real);

/**
 * ℓ-bit model with localization length `xi`, couplings up to `max_order`
 * spins and fields uniform in `[-w, w]`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MdStatus md_realization_lbit(size_t n_sites,
                                  double xi,
                                  size_t max_order,
                                  double w,
                                  uint64_t seed,
                                  struct MdRealization **out_real);

/**
 * Number of sites, or 0 for a null handle.
 *
 * # Safety
 * `real` must be null or a live handle.
 */
size_t md_realization_n_sites(const struct MdRealization *real);

/**
 * Copies the on-site fields into `fields`, of length `len == L`.
 *
 * # Safety
 * `real` must be a live handle; `fields` must point to `len` doubles.
 */
enum MdStatus md_realization_fields(const struct MdRealization *real, double *fields, size_t len);

/**
 * Releases a realization; null is ignored.
 *
 * # Safety
 * `real` must be null or a handle not yet freed.
 */
void md_realization_free(struct MdRealization *real);

/**
 * `e^{-iHt}|state>` as a new handle. The TFIM uses the Chebyshev
 * propagator with truncation tolerance `tol`; ℓ-bit dynamics is diagonal
 * and ignores `tol`.
 *
 * # Safety
 * `real` and `state` must be live handles; `out` must be writable.
 */
enum MdStatus md_evolve(const struct MdRealization *real,
                        const struct MdState *state,
                        double t,
                        double tol,
                        struct MdState **out_state);

/**
 * Disorder-averaged `M_2` of a product state under non-interacting
 * ℓ-bits with fields uniform in `[-w, w]`, by quadrature.
 *
 * # Safety
 * `theta` and `phi` must point to `n_sites` doubles; `out` must be writable.
 */
enum MdStatus md_anderson_sre(size_t n_sites,
                              const double *theta,
                              const double *phi,
                              double w,
                              double t,
                              double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAGICDYN_H */
