#ifndef METAPROFILE_H
#define METAPROFILE_H

/* C interface to the meta-profile pipeline library.
 *
 * Every function returns an mp_status; MP_OK means success. On failure the
 * thread-local message from mp_last_error() describes what went wrong. All
 * buffers handed out through char** / double** parameters are owned by the
 * caller and must be released with mp_free().
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mp_status {
  MP_OK = 0,
  MP_ERR_INVALID_ARGUMENT = 1,
  MP_ERR_PARSE = 2,
  MP_ERR_IO = 3,
  MP_ERR_CONFIG = 4,
  MP_ERR_NUMERIC = 5,
  MP_ERR_INTERNAL = 6
} mp_status;

/* Library version as "major.minor.patch". Static storage; do not free. */
const char* mp_version(void);

/* Message of the last failure on this thread; "" if the last call succeeded.
 * Static storage; do not free. */
const char* mp_last_error(void);

/* Worker threads for parallel sections. n < 1 is clamped to 1. Results are
 * identical for any thread count. */
void mp_set_threads(int n);

/* Releases any buffer returned through an out-parameter of this API. */
void mp_free(void* p);

/* -------------------------------------------------------------------------
 * Pipeline commands
 *
 * config_path names a JSON config file. overrides_json is an optional JSON
 * object merged over the file (pass NULL or "" for none); scalar keys replace,
 * nested objects merge recursively. manifest_json_out, when non-NULL, receives
 * the run manifest as a JSON string (free with mp_free). Artifacts land under
 * the configured output directory.
 * ------------------------------------------------------------------------- */

mp_status mp_run_generate(const char* config_path, const char* overrides_json,
                          char** manifest_json_out);
mp_status mp_run_encode(const char* config_path, const char* overrides_json,
                        char** manifest_json_out);
mp_status mp_run_pretrain(const char* config_path, const char* overrides_json,
                          char** manifest_json_out);
mp_status mp_run_meta_train(const char* config_path, const char* overrides_json,
                            char** manifest_json_out);
mp_status mp_run_evaluate(const char* config_path, const char* overrides_json,
                          char** manifest_json_out);
mp_status mp_run_report(const char* config_path, const char* overrides_json,
                        char** manifest_json_out);
/* All six commands in order; the returned manifest is the concatenation
 * (a JSON array). */
mp_status mp_run_all(const char* config_path, const char* overrides_json,
                     char** manifest_json_out);

/* Hash of the canonical config serialization (after overrides). Two configs
 * with equal hashes produce byte-identical runs. */
mp_status mp_config_hash(const char* config_path, const char* overrides_json, char** hash_out);

/* -------------------------------------------------------------------------
 * Sparse heatmap codec
 *
 * Text grammar: "day, hour, channel: value;" records, e.g.
 * "2, 10, 28: 5000; 100, 20, 25: 6000". Whitespace is flexible, the trailing
 * semicolon optional, and "" is an empty heatmap.
 * ------------------------------------------------------------------------- */

typedef struct mp_heatmap mp_heatmap;

mp_status mp_heatmap_parse(const char* text, int num_channels, mp_heatmap** out);
mp_status mp_heatmap_serialize(const mp_heatmap* h, char** text_out);
mp_status mp_heatmap_num_cells(const mp_heatmap* h, int64_t* out);
mp_status mp_heatmap_num_channels(const mp_heatmap* h, int* out);
/* Cell i in storage order. Any out-pointer may be NULL. */
mp_status mp_heatmap_cell(const mp_heatmap* h, int64_t i, int* day, int* hour, int* channel,
                          float* value);
void mp_heatmap_free(mp_heatmap* h);

/* -------------------------------------------------------------------------
 * Ranking metrics
 *
 * labels are 0/1; scores may be any finite values; n > 0 with at least one
 * positive and one negative for AUROC, at least one positive for AUPR.
 * ------------------------------------------------------------------------- */

mp_status mp_auroc(const double* scores, const int* labels, int64_t n, double* out);
mp_status mp_aupr(const double* scores, const int* labels, int64_t n, double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* METAPROFILE_H */
