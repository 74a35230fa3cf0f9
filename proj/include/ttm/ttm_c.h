#ifndef TTM_C_H
#define TTM_C_H

/* C interface of the ttm_core shared library.
 *
 * Two layers:
 *   - ttm_run(): coarse command driver ("synth", "prepare", "pretrain",
 *     "finetune", "forecast", "eval", "inspect"). Options arrive as a flat
 *     JSON object; outputs are files plus a JSON result string. Every run
 *     writes a run-manifest JSON next to its primary output.
 *   - an opaque model handle for in-process forecasting from raw buffers.
 *
 * All strings returned through char** are heap-allocated; release them with
 * ttm_string_free(). Error messages for the most recent failing call on the
 * current thread are available via ttm_last_error().
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ttm_status {
    TTM_OK = 0,
    TTM_ERR_SHAPE = 1,
    TTM_ERR_CONTRACT = 2,
    TTM_ERR_CONFIG = 3,
    TTM_ERR_DATA = 4,
    TTM_ERR_IO = 5,
    TTM_ERR_CRC = 6,
    TTM_ERR_VERSION = 7,
    TTM_ERR_FINGERPRINT = 8,
    TTM_ERR_INTERNAL = 100
} ttm_status;

/* Library version / build identifier (static storage, do not free). */
const char* ttm_version(void);

/* Message of the last error on this thread (static storage, do not free). */
const char* ttm_last_error(void);

void ttm_string_free(char* s);

/* Runs one pipeline command. `command` is one of: synth, prepare, pretrain,
 * finetune, forecast, eval, inspect. `options_json` is a JSON object; see
 * the CLI documentation for the recognized keys per command. On success
 * *result_json (if non-NULL) receives a JSON summary of the run. */
ttm_status ttm_run(const char* command, const char* options_json, char** result_json);

/* SHA-256 of a file; out_hex must hold at least 65 bytes. */
ttm_status ttm_hash_file(const char* path, char* out_hex);

/* ------------------------------------------------------------------ */
/* in-process model handle                                             */
/* ------------------------------------------------------------------ */

typedef struct ttm_model ttm_model;

ttm_status ttm_model_open(const char* checkpoint_path, ttm_model** out);
void ttm_model_close(ttm_model* m);

/* JSON with model/head config, fingerprint and load warnings. */
ttm_status ttm_model_info(const ttm_model* m, char** json);

/* X is row-major [channels x sl]; out receives row-major
 * [target_channels x fl]. out_capacity is the element count of out. */
ttm_status ttm_model_forecast(const ttm_model* m, const double* X, int32_t channels, int32_t sl,
                              int32_t resolution_id, double* out, int64_t out_capacity);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TTM_C_H */
