#ifndef HAPNET_H
#define HAPNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum HapnetBaseline {
  HAPNET_BASELINE_NONE = 0,
  HAPNET_BASELINE_UNIFORM_POWER = 1,
  HAPNET_BASELINE_RANDOM_ASSOCIATION = 2,
} HapnetBaseline;

typedef enum HapnetPath {
  HAPNET_PATH_FREQUENCY_PARTITIONING = 0,
  HAPNET_PATH_NEAR_OPTIMAL = 1,
} HapnetPath;

/**
 * Result code of every fallible call.
 */
typedef enum HapnetStatus {
  HAPNET_STATUS_OK = 0,
  HAPNET_STATUS_NULL_POINTER = 1,
  HAPNET_STATUS_INVALID_ARGUMENT = 2,
  HAPNET_STATUS_CONFIG = 3,
  HAPNET_STATUS_PARSE = 4,
  HAPNET_STATUS_INFEASIBLE = 5,
  HAPNET_STATUS_IO = 6,
  HAPNET_STATUS_NUMERIC = 7,
  HAPNET_STATUS_PANIC = 8,
} HapnetStatus;

typedef enum HapnetUtility {
  HAPNET_UTILITY_MSU = 0,
  HAPNET_UTILITY_MMU = 1,
} HapnetUtility;

/**
 * Outcome of one short-term solve.
 */
typedef struct HapnetReport HapnetReport;

/**
 * Configuration plus one generated scenario.
 */
typedef struct HapnetScenario HapnetScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty after success).
 * Valid until the next call on the same thread.
 */
const char *hapnet_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hapnet_version(void);

/**
 * Scenario from the default configuration with `users` users.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum HapnetStatus hapnet_scenario_new(size_t users, uint64_t seed, struct HapnetScenario **out);

/**
 * Scenario from a TOML configuration (or run manifest).
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum HapnetStatus hapnet_scenario_from_toml(const char *toml,
                                            uint64_t seed,
                                            struct HapnetScenario **out);

/**
 * Releases a scenario. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void hapnet_scenario_free(struct HapnetScenario *s);

/**
 * Node counts of a scenario. Any output pointer may be null.
 *
 * # Safety
 * `s` must be a valid handle; non-null outputs must be valid for writes.
 */
enum HapnetStatus hapnet_scenario_counts(const struct HapnetScenario *s,
                                         size_t *users,
                                         size_t *tbs,
                                         size_t *haps,
                                         size_t *gateways);

/**
 * Position of HAP `index` in meters.
 *
 * # Safety
 * `s` must be a valid handle; `x`, `y`, `z` must be valid for writes.
 */
enum HapnetStatus hapnet_scenario_hap_position(const struct HapnetScenario *s,
                                               size_t index,
                                               double *x,
                                               double *y,
                                               double *z);

/**
 * Scenario as JSON. Release the string with [`hapnet_string_free`].
 *
 * # Safety
 * `s` must be a valid handle; `out` must be valid for writes.
 */
enum HapnetStatus hapnet_scenario_to_json(const struct HapnetScenario *s, char **out);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `p` must come from this library and not be used afterwards.
 */
void hapnet_string_free(char *p);

/**
 * Runs the long-term placement stage and moves the scenario's HAPs.
 * `objective` (nullable) receives the number of HAP-served users under
 * average statistics.
 *
 * # Safety
 * `s` must be a valid handle; `objective` may be null.
 */
enum HapnetStatus hapnet_place(struct HapnetScenario *s, size_t *objective);

/**
 * Solves one short-term instance (fading draw, association, power) on the
 * scenario's current HAP positions.
 *
 * # Safety
 * `s` must be a valid handle; `out` must be valid for writes.
 */
enum HapnetStatus hapnet_solve(const struct HapnetScenario *s,
                               enum HapnetPath path,
                               enum HapnetUtility utility,
                               enum HapnetBaseline baseline,
                               struct HapnetReport **out);

/**
 * Releases a report. Null is ignored.
 *
 * # Safety
 * `r` must come from this library and not be used afterwards.
 */
void hapnet_report_free(struct HapnetReport *r);

/**
 * Utility value (sum-rate or minimum rate, bit/s).
 *
 * # Safety
 * `r` must be a valid handle; `value` must be valid for writes.
 */
enum HapnetStatus hapnet_report_utility(const struct HapnetReport *r, double *value);

/**
 * Number of users in the report.
 *
 * # Safety
 * `r` must be a valid handle; `count` must be valid for writes.
 */
enum HapnetStatus hapnet_report_user_count(const struct HapnetReport *r, size_t *count);

/**
 * Copies per-user rates (bit/s) into `buf`, which must hold `len` values;
 * `len` must equal the user count.
 *
 * # Safety
 * `r` must be a valid handle; `buf` must be valid for `len` writes.
 */
enum HapnetStatus hapnet_report_user_rates(const struct HapnetReport *r, double *buf, size_t len);

/**
 * Serving tier of `user`: 0 ground, 1 air, 2 space, -1 unserved.
 *
 * # Safety
 * `r` must be a valid handle; `tier` must be valid for writes.
 */
enum HapnetStatus hapnet_report_user_tier(const struct HapnetReport *r, size_t user, int32_t *tier);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAPNET_H */
