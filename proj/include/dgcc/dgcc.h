#ifndef DGCC_DGCC_H
#define DGCC_DGCC_H

#include <stddef.h>
#include <stdint.h>

#if defined(DGCC_BUILDING_LIBRARY)
#define DGCC_API __attribute__((visibility("default")))
#else
#define DGCC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dgcc_status {
  DGCC_OK = 0,
  DGCC_E_ARGUMENT = 1,   /* null handle, unknown key or field, bad index */
  DGCC_E_USAGE = 2,      /* invalid configuration value or combination */
  DGCC_E_DURABILITY = 3, /* log or checkpoint could not be made durable */
  DGCC_E_IO = 4,
  DGCC_E_INTERNAL = 5
} dgcc_status;

typedef struct dgcc_config dgcc_config;
/* One or more run reports. */
typedef struct dgcc_report dgcc_report;

DGCC_API const char* dgcc_version(void);
DGCC_API const char* dgcc_status_name(dgcc_status status);
/* Message of the last failed call on this thread; "" when none. */
DGCC_API const char* dgcc_last_error(void);

DGCC_API dgcc_status dgcc_config_create(dgcc_config** out);
DGCC_API void dgcc_config_destroy(dgcc_config* config);
/* Keys are the CLI flag names without the leading dashes, e.g.
 * "protocol", "max-batch", "theta", "log-dir". "audit" takes true/false. */
DGCC_API dgcc_status dgcc_config_set(dgcc_config* config, const char* key, const char* value);
DGCC_API dgcc_status dgcc_config_validate(const dgcc_config* config);

DGCC_API dgcc_status dgcc_run(const dgcc_config* config, dgcc_report** out);
/* axis: threads, theta, rw_ratio or batch_size. protocols: comma list;
 * NULL or "" uses the configured protocol. */
DGCC_API dgcc_status dgcc_sweep(const dgcc_config* config, const char* axis, const double* values,
                                size_t count, const char* protocols, dgcc_report** out);

DGCC_API size_t dgcc_report_runs(const dgcc_report* report);
/* Integer fields: submitted, committed, final_aborts, graphs, log_flushes,
 * log_bytes, checkpoints, run_transactions, aborts.deadlock,
 * aborts.validation, aborts.write_conflict, aborts.condition_check,
 * audit.serializable, audit.write_skew, accounting_closed, and audit.passed,
 * which also admits write skew under mvcc. */
DGCC_API dgcc_status dgcc_report_u64(const dgcc_report* report, size_t run, const char* field,
                                     uint64_t* out);
/* Real fields: throughput, measured_s, mean_batch_size, latency.mean_us,
 * latency.p50_us, latency.p95_us, latency.p99_us, latency.max_us. */
DGCC_API dgcc_status dgcc_report_double(const dgcc_report* report, size_t run, const char* field,
                                        double* out);
/* format: "json" or "csv". The string is released with dgcc_string_free. */
DGCC_API dgcc_status dgcc_report_format(const dgcc_report* report, const char* format, char** out);
DGCC_API void dgcc_report_destroy(dgcc_report* report);
DGCC_API void dgcc_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
