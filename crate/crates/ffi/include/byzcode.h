#ifndef BYZCODE_H
#define BYZCODE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  BZ_REGION_MODE_DFR = 0,
  BZ_REGION_MODE_RFR = 1,
} BzRegionMode;

/**
 * Status codes.
 */
typedef enum {
  BZ_STATUS_OK = 0,
  BZ_STATUS_NULL_POINTER = 1,
  BZ_STATUS_INVALID_ARGUMENT = 2,
  BZ_STATUS_ZERO_PROBABILITY_CONTEXT = 3,
  BZ_STATUS_CONVERGENCE_FAILURE = 4,
  BZ_STATUS_NUMERIC_FAILURE = 5,
  BZ_STATUS_PRECONDITION_VIOLATION = 6,
  BZ_STATUS_INVALID_UTF8 = 7,
  BZ_STATUS_INVALID_JSON = 8,
  BZ_STATUS_PANIC = 9,
} BzStatus;

typedef enum {
  BZ_STRATEGY_HONEST = 0,
  BZ_STRATEGY_GIBBERISH = 1,
  BZ_STRATEGY_FABRICATE = 2,
  BZ_STRATEGY_COLLIDE = 3,
} BzStrategy;

/**
 * Opaque joint distribution.
 */
typedef struct BzPmf BzPmf;

/**
 * Protocol parameters. A `typicality_eps` of zero or less selects the
 * default tolerance.
 */
typedef struct {
  size_t k;
  size_t rounds;
  double epsilon;
  size_t functions;
  uint64_t seed;
  size_t t;
  double typicality_eps;
} BzSimParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call on the same thread.
 */
const char *bz_last_error(void);

/**
 * Library version, static storage.
 */
const char *bz_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void bz_string_free(char *s);

/**
 * Builds a distribution from alphabet sizes and row-major probabilities
 * (last sensor fastest).
 *
 * # Safety
 * `sizes` must point to `m` values and `probs` to `n` values.
 */
BzStatus bz_pmf_new(const size_t *sizes, size_t m, const double *probs, size_t n, BzPmf **out);

/**
 * Parses the JSON distribution format used by the command line tool.
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
BzStatus bz_pmf_from_json(const char *json, BzPmf **out);

/**
 * # Safety
 * `p` must be null or a handle from this library, freed once.
 */
void bz_pmf_free(BzPmf *p);

/**
 * Number of sensors, 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t bz_pmf_num_sensors(const BzPmf *p);

/**
 * `H(X_S)` in bits.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
BzStatus bz_entropy(const BzPmf *p, uint32_t set, double *out);

/**
 * `I(X_A; X_B | X_C)` in bits.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
BzStatus bz_conditional_mutual_information(const BzPmf *p,
                                           uint32_t a,
                                           uint32_t b,
                                           uint32_t given,
                                           double *out);

/**
 * Minimum variable-rate sum rate with up to `t` traitors.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
BzStatus bz_sum_rate_star(const BzPmf *p, size_t t, double *out);

/**
 * Closed form for a single traitor.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
BzStatus bz_closed_form_t1(const BzPmf *p, double *out);

/**
 * Minimum sum rate over `R_k`.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
BzStatus bz_min_sum_rate(const BzPmf *p, size_t k, double *out);

/**
 * Whether the `n` rates are achievable with fixed-rate coding.
 *
 * # Safety
 * `rates` must point to `n` values and `out` be writable.
 */
BzStatus bz_region_check(const BzPmf *p,
                         const double *rates,
                         size_t n,
                         size_t t,
                         BzRegionMode mode,
                         bool *out);

/**
 * Runs one protocol session and writes its report as a JSON string.
 * `q_tilde` may be null unless the strategy is fabricate.
 *
 * # Safety
 * Handles must be live, `params` readable and `out_json` writable.
 */
BzStatus bz_simulate_session(const BzPmf *p,
                             const BzSimParams *params,
                             uint32_t traitors,
                             BzStrategy strategy,
                             const BzPmf *q_tilde,
                             char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BYZCODE_H */
