#ifndef TTPSIM_CAPI_H
#define TTPSIM_CAPI_H

/* C interface to the simulator. Handles are opaque; every fallible call
 * returns a ttp_status and leaves a message for ttp_last_error on failure. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct ttp_config ttp_config;
typedef struct ttp_result ttp_result;

typedef enum ttp_status {
  TTP_OK = 0,
  TTP_ERR_INVALID_ARG = 1, /* null handle, unknown name, missing baseline */
  TTP_ERR_CONFIG = 2,      /* bad key, value, or cross-field validation */
  TTP_ERR_RUNTIME = 3,     /* simulation failure or undefined metric */
  TTP_ERR_IO = 4,          /* file could not be read or written */
} ttp_status;

/* Fresh config holding the built-in defaults; NULL on allocation failure.
 * Destroy with ttp_config_destroy. */
ttp_config* ttp_config_create(void);
ttp_config* ttp_config_clone(const ttp_config* cfg);
void ttp_config_destroy(ttp_config* cfg);

/* Replaces `cfg` with the built-in defaults plus the file's settings. */
ttp_status ttp_config_load_file(ttp_config* cfg, const char* path);

/* Applies one key=value override (same keys as the config file). */
ttp_status ttp_config_set(ttp_config* cfg, const char* key, const char* value);

/* Runs one experiment. On success *out owns the result; destroy with
 * ttp_result_destroy. collect_trace != 0 records the stack-event trace. */
ttp_status ttp_run(const ttp_config* cfg, int collect_trace, ttp_result** out);

uint64_t ttp_result_cycles(const ttp_result* res);

/* Policy the run executed ("off", "ttp-dfs", ...). The pointer stays valid
 * until the result is destroyed. NULL for a null result. */
const char* ttp_result_policy(const ttp_result* res);

/* Scalar metric by name. Names: cycles, rays, node_visits,
 * avg_nodes_per_ray, max_nodes_per_ray, l1_accuracy, l2_accuracy,
 * l1_coverage, l2_coverage, l1_efficiency, l2_efficiency, l1_mpki, l2_mpki,
 * l1_demand_misses, l2_demand_misses, dram_reads, dram_writebacks,
 * dram_bw_util, speedup. coverage and speedup need `baseline`; other names
 * ignore it (pass NULL). A metric undefined for this run (accuracy with no
 * prefetches installed) fails with TTP_ERR_RUNTIME. */
ttp_status ttp_result_metric(const ttp_result* res, const ttp_result* baseline,
                             const char* name, double* out);

/* CSV column header; static storage, do not free. */
const char* ttp_csv_header(void);

/* One CSV row for this run, NULL on failure. baseline may be NULL (the
 * comparative columns stay empty). Free with ttp_string_free. */
char* ttp_result_csv_row(const ttp_result* res, const ttp_result* baseline,
                         const char* run_id);

/* Binary PPM of the primary wave, one color per primitive. */
ttp_status ttp_result_write_image(const ttp_result* res, const char* path);

/* Text trace, one `cycle thread_id push|pop 0xADDR` line per event. Fails
 * unless the run collected a trace. */
ttp_status ttp_result_write_trace(const ttp_result* res, const char* path);

void ttp_result_destroy(ttp_result* res);

/* Message from the last failing call on this thread; empty if none. */
const char* ttp_last_error(void);

void ttp_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* TTPSIM_CAPI_H */
