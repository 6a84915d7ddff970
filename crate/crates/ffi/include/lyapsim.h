/* C interface to the lyapsim Lyapunov-exponent estimators. */

#ifndef LYAPSIM_H
#define LYAPSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Everything except `Ok` leaves out-parameters untouched.
 */
typedef enum LyapStatus {
  LyapStatus_Ok = 0,
  LyapStatus_NullPointer = 1,
  LyapStatus_InvalidArgument = 2,
  LyapStatus_DimensionMismatch = 3,
  LyapStatus_RankDeficient = 4,
  LyapStatus_NonIidFamily = 5,
  LyapStatus_ChainDied = 6,
  LyapStatus_AllChainsDied = 7,
  LyapStatus_Config = 8,
  LyapStatus_Io = 9,
  LyapStatus_Internal = 10,
} LyapStatus;

/**
 * Opaque matrix-ensemble handle.
 */
typedef struct LyapEnsemble LyapEnsemble;

/**
 * One exponent estimate. `died_at` is meaningful only when `died` is true;
 * a dead chain's value averages the increments collected before the fatal
 * step over the full requested length.
 */
typedef struct LyapExponent {
  /**
   * 1 for the top exponent, j for the j-th spectrum order, 2 for the
   * pair sum, the dimension for the least exponent.
   */
  uint32_t order;
  double value;
  /**
   * Standard error of the value; named to stay clear of the stdio macro.
   */
  double std_err;
  uint64_t n_steps;
  uint32_t dim;
  bool died;
  uint64_t died_at;
} LyapExponent;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an iid Gaussian ensemble with entry scale 1/sqrt(n).
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum LyapStatus lyap_ensemble_gaussian(size_t n, struct LyapEnsemble **out);

/**
 * Creates an iid Rademacher (sign) ensemble with entry scale 1/sqrt(n).
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum LyapStatus lyap_ensemble_rademacher(size_t n, struct LyapEnsemble **out);

/**
 * Creates an iid symmetric-uniform ensemble with entry scale 1/sqrt(n).
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum LyapStatus lyap_ensemble_uniform(size_t n, struct LyapEnsemble **out);

/**
 * Creates an iid two-point ensemble taking `a` with probability `p` and
 * `b` otherwise, atoms normalized to mean 0 and variance 1.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum LyapStatus lyap_ensemble_two_point(size_t n,
                                        double p,
                                        double a,
                                        double b,
                                        struct LyapEnsemble **out);

/**
 * Creates the 2n x 2n symplectic transfer-matrix ensemble with Wigner
 * coupling `lambda` and energy `energy`.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum LyapStatus lyap_ensemble_symplectic(size_t n,
                                         double lambda,
                                         double energy,
                                         struct LyapEnsemble **out);

/**
 * Creates the deterministic 2x2 shift-cocycle ensemble. `cos_coeffs[k]`
 * multiplies cos(2 pi k x), `sin_coeffs[k]` multiplies sin(2 pi (k+1) x);
 * either pointer may be null when its length is zero.
 *
 * # Safety
 * `cos_coeffs`/`sin_coeffs` must point to `cos_len`/`sin_len` readable
 * doubles when nonzero; `out` must be valid for writing one pointer.
 */
enum LyapStatus lyap_ensemble_shift(double energy,
                                    double omega,
                                    double x0,
                                    const double *cos_coeffs,
                                    size_t cos_len,
                                    const double *sin_coeffs,
                                    size_t sin_len,
                                    struct LyapEnsemble **out);

/**
 * Replaces the entry scale of an iid ensemble (default 1/sqrt(n)).
 * Structured families reject this.
 *
 * # Safety
 * `ensemble` must be a live handle from a constructor, not used
 * concurrently.
 */
enum LyapStatus lyap_ensemble_set_scale(struct LyapEnsemble *ensemble, double scale);

/**
 * Matrix dimension of the ensemble (2n for symplectic, 2 for shift).
 *
 * # Safety
 * `ensemble` must be a live handle or null (returns 0).
 */
size_t lyap_ensemble_dim(const struct LyapEnsemble *ensemble);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `ensemble` must be null or a handle not freed before; it is invalid
 * afterwards.
 */
void lyap_ensemble_free(struct LyapEnsemble *ensemble);

/**
 * Estimates the top Lyapunov exponent over `n_steps` factors.
 *
 * # Safety
 * `ensemble` must be a live handle; `out` must be valid for writing one
 * `LyapExponent`.
 */
enum LyapStatus lyap_top_exponent(const struct LyapEnsemble *ensemble,
                                  size_t n_steps,
                                  uint64_t seed,
                                  uint64_t stream_id,
                                  struct LyapExponent *out);

/**
 * Estimates the sum of the two leading exponents.
 *
 * # Safety
 * `ensemble` must be a live handle; `out` must be valid for writing one
 * `LyapExponent`.
 */
enum LyapStatus lyap_pair_exponent(const struct LyapEnsemble *ensemble,
                                   size_t n_steps,
                                   uint64_t seed,
                                   uint64_t stream_id,
                                   struct LyapExponent *out);

/**
 * Estimates the least exponent by the hyperplane-distance recursion.
 *
 * # Safety
 * `ensemble` must be a live handle; `out` must be valid for writing one
 * `LyapExponent`.
 */
enum LyapStatus lyap_least_exponent(const struct LyapEnsemble *ensemble,
                                    size_t n_steps,
                                    uint64_t seed,
                                    uint64_t stream_id,
                                    struct LyapExponent *out);

/**
 * Estimates the `k` leading exponents by orthonormal-frame iteration,
 * writing them in decreasing order.
 *
 * # Safety
 * `ensemble` must be a live handle; `out` must be valid for writing `k`
 * `LyapExponent` values.
 */
enum LyapStatus lyap_spectrum(const struct LyapEnsemble *ensemble,
                              size_t n_steps,
                              uint64_t seed,
                              uint64_t stream_id,
                              size_t k,
                              struct LyapExponent *out);

/**
 * Writes the n closed-form Gaussian-ensemble exponents, decreasing.
 *
 * # Safety
 * `out` must be valid for writing `n` doubles.
 */
enum LyapStatus lyap_newman_exponents(size_t n, double *out);

/**
 * Digamma function; NaN for d <= 0 or non-finite d.
 */
double lyap_digamma(double d);

/**
 * Weak-coupling symplectic exponent gamma_d
 * (lambda^2 (1 + 2(n-d)) / (8 sin^2 kappa), E = 2 cos kappa);
 * NaN outside 1 <= d <= n, 0 < |E| < 2.
 */
double lyap_ssb_exponent(size_t n, size_t d, double lambda, double energy);

/**
 * Least common denominator of the vector at `x`: grid scan over
 * (0, theta_max] at `grid_step` resolution with local bisection. Writes the
 * value to `out_value` and the verified admissible dilation to
 * `out_witness` (NaN when the search certified value >= theta_max).
 *
 * # Safety
 * `x` must point to `n` readable doubles; `out_value` and `out_witness`
 * must each be valid for writing one double.
 */
enum LyapStatus lyap_lcd(const double *x,
                         size_t n,
                         double gamma,
                         double kappa,
                         double theta_max,
                         double grid_step,
                         double *out_value,
                         double *out_witness);

/**
 * Small-ball probability estimate of the weighted atom sum along `x`
 * (maximum over a fixed 21-point target grid spanning [-3, 3]); the
 * ensemble must be an iid scalar-atom family.
 *
 * # Safety
 * `x` must point to `n` readable doubles; `ensemble` must be a live
 * handle; `out` must be valid for writing one double.
 */
enum LyapStatus lyap_small_ball(const double *x,
                                size_t n,
                                double eps,
                                const struct LyapEnsemble *ensemble,
                                size_t trials,
                                uint64_t seed,
                                double *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lyap_version(void);

/**
 * RNG algorithm identifier as a static NUL-terminated string.
 */
const char *lyap_rng_algorithm(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LYAPSIM_H */
