#ifndef SFSIM_H
#define SFSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_POINTER = 1,
  SF_STATUS_INVALID_UTF8 = 2,
  SF_STATUS_PARSE = 3,
  SF_STATUS_SCENARIO_INVALID = 4,
  SF_STATUS_CONFIG_INVALID = 5,
  SF_STATUS_PAYLOAD_TOO_LARGE = 6,
  SF_STATUS_HOOK_VIOLATION = 7,
  SF_STATUS_PATTERN_INVALID = 8,
  SF_STATUS_NO_SOURCES = 9,
  SF_STATUS_UNKNOWN_PHY = 10,
  SF_STATUS_IO = 11,
  SF_STATUS_SERIALIZE = 12,
  SF_STATUS_PANIC = 13,
} SfStatus;

/**
 * Result of running a scenario.
 */
typedef struct SfReport SfReport;

/**
 * Parsed scenario, possibly with seed or replica overrides.
 */
typedef struct SfScenario SfScenario;

/**
 * Pooled metrics of a report.
 */
typedef struct SfSummary {
  uint32_t replicas;
  uint64_t generated;
  uint64_t delivered;
  double reliability;
  double latency_mean_us;
  uint64_t latency_median_us;
  uint64_t latency_p95_us;
  uint64_t radio_on_us;
  double radio_on_us_per_node;
  double energy_mj;
} SfSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a
 * successful one. Valid until the next call on the same thread.
 */
const char *sf_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *sf_version(void);

/**
 * Parse a scenario from TOML text.
 */
enum SfStatus sf_scenario_from_toml(const char *text, struct SfScenario **out);

/**
 * Parse a scenario from a TOML file.
 */
enum SfStatus sf_scenario_from_file(const char *path, struct SfScenario **out);

enum SfStatus sf_scenario_set_seed(struct SfScenario *scenario, uint64_t seed);

enum SfStatus sf_scenario_set_replicas(struct SfScenario *scenario, uint32_t replicas);

/**
 * Check a scenario without running it.
 */
enum SfStatus sf_scenario_validate(const struct SfScenario *scenario);

/**
 * Release a scenario. Null is ignored.
 */
void sf_scenario_free(struct SfScenario *scenario);

/**
 * Run every replica of `scenario`.
 */
enum SfStatus sf_run(const struct SfScenario *scenario, struct SfReport **out);

/**
 * Release a report. Null is ignored.
 */
void sf_report_free(struct SfReport *report);

enum SfStatus sf_report_summary(const struct SfReport *report, struct SfSummary *out);

/**
 * Full report as JSON. Free the string with [`sf_string_free`].
 */
enum SfStatus sf_report_to_json(const struct SfReport *report, char **out);

/**
 * Report as `scope,replica,metric,value` CSV. Free with [`sf_string_free`].
 */
enum SfStatus sf_report_to_csv(const struct SfReport *report, char **out);

/**
 * Release a string returned by this library. Null is ignored.
 */
void sf_string_free(char *s);

/**
 * On-air time of a frame in microseconds. `phy` is a name such as `BLE_2M`.
 */
enum SfStatus sf_airtime_us(const char *phy, size_t payload_len, uint64_t *out);

/**
 * Slot length in microseconds with default slot timing.
 */
enum SfStatus sf_slot_duration_us(const char *phy, size_t payload_len, uint64_t *out);

/**
 * Fast-PHY utilization in percent chosen for `late` of `expected` sources.
 */
enum SfStatus sf_select_pattern(uint32_t expected, uint32_t late, uint32_t *fast_utilization);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SFSIM_H */
