#ifndef AFP_H
#define AFP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum AfpStatus {
  AFP_STATUS_OK = 0,
  AFP_STATUS_NULL_ARGUMENT = 1,
  AFP_STATUS_INVALID_UTF8 = 2,
  AFP_STATUS_IO = 3,
  AFP_STATUS_PARSE = 4,
  AFP_STATUS_VALIDATION = 5,
  AFP_STATUS_RANGE = 6,
  AFP_STATUS_INSUFFICIENT_SAMPLES = 7,
  AFP_STATUS_PROMPT = 8,
  AFP_STATUS_GRAPH_SERVICE = 9,
  AFP_STATUS_INTERNAL = 10,
} AfpStatus;

typedef enum AfpStrategy {
  AFP_STRATEGY_CENTROID = 0,
  AFP_STRATEGY_HIGHEST_SCORE = 1,
} AfpStrategy;

/**
 * Pruning parameters; starts at the library defaults.
 */
typedef struct AfpConfig AfpConfig;

/**
 * A semantic graph to textualize into the prompt.
 */
typedef struct AfpGraph AfpGraph;

/**
 * A validated frame manifest.
 */
typedef struct AfpManifest AfpManifest;

typedef struct AfpThresholdReport {
  double tau;
  double peak_p;
  double bandwidth;
  size_t sample_count;
} AfpThresholdReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or "" if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *afp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *afp_version(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void afp_string_free(char *s);

struct AfpConfig *afp_config_new(void);

/**
 * # Safety
 * `cfg` must be null or a handle from [`afp_config_new`] not yet freed.
 */
void afp_config_free(struct AfpConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_alpha(struct AfpConfig *cfg, double alpha);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_beta(struct AfpConfig *cfg, double beta);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_kde_offset(struct AfpConfig *cfg, double offset);

/**
 * A bandwidth of 0 selects Scott's rule; positive values are used as is.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_kde_bandwidth(struct AfpConfig *cfg, double bandwidth);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_kde_grid_points(struct AfpConfig *cfg, size_t points);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_refine(struct AfpConfig *cfg, bool refine);

/**
 * `strategy` is one of the `AFP_STRATEGY_*` values; anything else is a
 * range error.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_strategy(struct AfpConfig *cfg, uint32_t strategy);

/**
 * Seeded random orthonormal projection for raw branch vectors.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_projection_seed(struct AfpConfig *cfg, uint64_t seed);

/**
 * Keep the first 512 components of each raw branch vector.
 *
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_projection_identity(struct AfpConfig *cfg);

/**
 * # Safety
 * `cfg` must be a live config handle.
 */
enum AfpStatus afp_config_set_token_costs(struct AfpConfig *cfg,
                                          uint64_t tokens_per_frame,
                                          double tokens_per_text_char);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AfpStatus afp_manifest_load(const char *path, struct AfpManifest **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum AfpStatus afp_manifest_parse(const char *json, struct AfpManifest **out);

/**
 * # Safety
 * `manifest` must be null or a live manifest handle.
 */
void afp_manifest_free(struct AfpManifest *manifest);

/**
 * Number of frames, or 0 for a null handle.
 *
 * # Safety
 * `manifest` must be null or a live manifest handle.
 */
size_t afp_manifest_frame_count(const struct AfpManifest *manifest);

/**
 * Number of load-time warnings (for example defaulted scores).
 *
 * # Safety
 * `manifest` must be null or a live manifest handle.
 */
size_t afp_manifest_warning_count(const struct AfpManifest *manifest);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum AfpStatus afp_graph_parse(const char *json, struct AfpGraph **out);

/**
 * # Safety
 * `graph` must be null or a live graph handle.
 */
void afp_graph_free(struct AfpGraph *graph);

/**
 * Prunes `manifest` and writes the prompt bundle as JSON to `out_json`.
 *
 * `graph`, `config` and `question` may be null (no graph, defaults, generic
 * question). `options` points to `option_count` strings and may be null
 * when the count is 0.
 *
 * # Safety
 * Handles must be live; strings NUL-terminated; `out_json` writable.
 */
enum AfpStatus afp_run(const struct AfpManifest *manifest,
                       const struct AfpGraph *graph,
                       const struct AfpConfig *config,
                       const char *question,
                       const char *const *options,
                       size_t option_count,
                       char **out_json);

/**
 * Density-peak threshold over `count` distance samples with Scott's
 * bandwidth and the default grid.
 *
 * # Safety
 * `samples` must point to `count` doubles; `out` must be writable.
 */
enum AfpStatus afp_adaptive_threshold(const double *samples,
                                      size_t count,
                                      double offset,
                                      struct AfpThresholdReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFP_H */
